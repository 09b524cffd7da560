//! WebAssembly bindings for the browser demo in `www/`.
//!
//! All arrays cross the boundary as flat `Float64Array`s. Every exported
//! function has a plain Rust counterpart (`*_impl`) so the logic is tested
//! natively.

use uibo::acquisition::{AcqConfig, MaximiserConfig, SearchRegion};
use uibo::driver::{run_episode, trial_start, EpisodeContext, MethodSpec, Planner};
use uibo::gp::{fit_posterior, Dataset, GaussianInput, Hyperparams};
use uibo::sim::{sample_terrain, NoiseModel, Terrain};
use wasm_bindgen::prelude::*;

const REGION_SIZE: f64 = 10.0;
const CENTERS: usize = 80;
const FLOOR: f64 = 0.5;
const SIGNAL_VAR: f64 = 16.0;
const NOISE_VAR: f64 = 0.01;

fn region() -> SearchRegion {
    SearchRegion::square(0.0, REGION_SIZE, 2)
}

fn terrain(seed: u32, length_scale: f64) -> Result<Terrain, String> {
    if !(length_scale > 0.0) {
        return Err("length scale must be positive".into());
    }
    let kernel = Hyperparams::isotropic(SIGNAL_VAR, length_scale, 2, NOISE_VAR, 0.0);
    sample_terrain(seed as u64, &region(), CENTERS, &kernel, FLOOR).map_err(|e| e.to_string())
}

/// `n * n` terrain values; index `i * n + j` is `(x_i, y_j)` on a lattice
/// spanning the 10x10 region.
pub fn terrain_grid_impl(seed: u32, length_scale: f64, n: usize) -> Result<Vec<f64>, String> {
    let t = terrain(seed, length_scale)?;
    Ok(t.grid(n.max(2)).into_iter().map(|(_, f)| f).collect())
}

fn parse_planner(s: &str) -> Result<Planner, String> {
    match s {
        "bo" => Ok(Planner::Standard),
        "ubo" => Ok(Planner::Unscented),
        "uibo" => Ok(Planner::UncertainInputs),
        _ => Err(format!("unknown planner `{s}`")),
    }
}

/// Result of one simulated exploration run.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Exploration {
    path: Vec<f64>,
    estimates: Vec<f64>,
    distance: f64,
    mean_vibration: f64,
}

#[wasm_bindgen]
impl Exploration {
    /// True positions `[x0, y0, x1, y1, ...]`, starting with the start point.
    #[wasm_bindgen(getter)]
    pub fn path(&self) -> Vec<f64> {
        self.path.clone()
    }

    /// Believed positions after each step, same layout as `path`.
    #[wasm_bindgen(getter)]
    pub fn estimates(&self) -> Vec<f64> {
        self.estimates.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn distance(&self) -> f64 {
        self.distance
    }

    #[wasm_bindgen(getter, js_name = meanVibration)]
    pub fn mean_vibration(&self) -> f64 {
        self.mean_vibration
    }
}

#[allow(clippy::too_many_arguments)]
pub fn explore_impl(
    seed: u32,
    length_scale: f64,
    planner: &str,
    entropy: bool,
    budget: usize,
    noise_sd: f64,
    kappa: f64,
    gamma: f64,
) -> Result<Exploration, String> {
    let t = terrain(seed, length_scale)?;
    let planner = parse_planner(planner)?;
    let acq = if entropy {
        AcqConfig::entropy()
    } else {
        AcqConfig::ducb(kappa, gamma)
    };
    let method = MethodSpec::new(planner, acq, 0.1, 2, budget.max(1));
    let noise = NoiseModel {
        exec_sd: noise_sd,
        loc_sd: noise_sd,
        obs_sd: NOISE_VAR.sqrt(),
    };
    let ctx = EpisodeContext {
        hyper: Hyperparams::isotropic(SIGNAL_VAR, length_scale, 2, NOISE_VAR, t.offset),
        maximiser: MaximiserConfig {
            grid_per_axis: 30,
            ..MaximiserConfig::default()
        },
        refit: None,
    };
    let start = trial_start(&t.region, seed as u64 ^ 0xA5A5);
    let rec = run_episode(&t, &method, &noise, &start, &ctx, seed as u64).map_err(|e| e.to_string())?;
    let mut path = start.clone();
    let mut estimates = start;
    for it in &rec.iterations {
        path.extend_from_slice(&it.true_loc);
        estimates.extend(it.est_input.mean().iter());
    }
    Ok(Exploration {
        path,
        estimates,
        distance: rec.distance(),
        mean_vibration: rec.mean_vibration(),
    })
}

/// Posterior over `[0, 10]` from 1-D observations logged with input
/// variance `input_var`, fitted twice: keeping the input variance and
/// ignoring it. Returns `[mean_u; n, var_u; n, mean_d; n, var_d; n]`.
pub fn posterior_1d_impl(xs: &[f64], zs: &[f64], input_var: f64, length_scale: f64, n: usize) -> Result<Vec<f64>, String> {
    if xs.len() != zs.len() {
        return Err("xs and zs must have equal length".into());
    }
    if !(input_var >= 0.0) || !(length_scale > 0.0) {
        return Err("input variance must be >= 0 and length scale > 0".into());
    }
    let m0 = if zs.is_empty() {
        0.0
    } else {
        zs.iter().sum::<f64>() / zs.len() as f64
    };
    let h = Hyperparams::isotropic(1.0, length_scale, 1, NOISE_VAR, m0);
    let n = n.max(2);
    let mut out = Vec::with_capacity(4 * n);
    for var in [input_var, 0.0] {
        let mut data = Dataset::new();
        for (x, z) in xs.iter().zip(zs) {
            let input = GaussianInput::isotropic(&[*x], var).map_err(|e| e.to_string())?;
            data.push(input, *z).map_err(|e| e.to_string())?;
        }
        let post = fit_posterior(&data, &h).map_err(|e| e.to_string())?;
        let mut means = Vec::with_capacity(n);
        let mut vars = Vec::with_capacity(n);
        for i in 0..n {
            let q = REGION_SIZE * i as f64 / (n - 1) as f64;
            let (m, v) = post.predict_at(&[q]).map_err(|e| e.to_string())?;
            means.push(m);
            vars.push(v);
        }
        out.extend(means);
        out.extend(vars);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = terrainGrid)]
pub fn terrain_grid(seed: u32, length_scale: f64, n: usize) -> Result<Vec<f64>, JsError> {
    terrain_grid_impl(seed, length_scale, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn explore(
    seed: u32,
    length_scale: f64,
    planner: &str,
    entropy: bool,
    budget: usize,
    noise_sd: f64,
    kappa: f64,
    gamma: f64,
) -> Result<Exploration, JsError> {
    explore_impl(seed, length_scale, planner, entropy, budget, noise_sd, kappa, gamma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = posterior1d)]
pub fn posterior_1d(xs: &[f64], zs: &[f64], input_var: f64, length_scale: f64, n: usize) -> Result<Vec<f64>, JsError> {
    posterior_1d_impl(xs, zs, input_var, length_scale, n).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terrain_grid_has_floor_scale_values() {
        let g = terrain_grid_impl(1, 1.0, 40).unwrap();
        assert_eq!(g.len(), 1600);
        assert!(g.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(terrain_grid_impl(1, 0.0, 40).is_err());
    }

    #[test]
    fn explore_matches_budget() {
        let e = explore_impl(3, 1.0, "uibo", false, 6, 0.07, 10.0, 1.0).unwrap();
        assert_eq!(e.path().len(), 2 * 7);
        assert_eq!(e.estimates().len(), 2 * 7);
        assert!(e.distance() > 0.0);
        assert!(explore_impl(3, 1.0, "nope", false, 6, 0.07, 10.0, 1.0).is_err());
    }

    #[test]
    fn posterior_1d_modes_agree_without_input_noise() {
        let xs = [1.0, 4.0, 6.5];
        let zs = [0.2, 1.5, -0.3];
        let out = posterior_1d_impl(&xs, &zs, 0.0, 1.0, 50).unwrap();
        assert_eq!(out.len(), 200);
        assert_eq!(&out[..100], &out[100..]);
        let noisy = posterior_1d_impl(&xs, &zs, 0.5, 1.0, 50).unwrap();
        assert_ne!(&noisy[..100], &noisy[100..]);
    }
}
