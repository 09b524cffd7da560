//! Synthetic terrain-roughness environments and noisy path execution.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acquisition::{euclidean, SearchRegion};
use crate::error::{Error, Result};
use crate::gp::{kernel_se, GaussianInput, Hyperparams};

/// Resolution of the grid used to anchor the terrain floor.
pub const AUDIT_GRID: usize = 200;
/// Path sampling step, in units of the shortest terrain length-scale.
pub const PATH_STEP_LENGTHSCALES: f64 = 0.05;

/// Random function from the RKHS of the SE kernel, shifted to stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kernel: Hyperparams,
    pub offset: f64,
    pub region: SearchRegion,
}

impl Terrain {
    /// Builds a terrain from explicit parameters.
    pub fn new(
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
        kernel: Hyperparams,
        offset: f64,
        region: SearchRegion,
    ) -> Result<Self> {
        if centers.len() != weights.len() {
            return Err(Error::InvalidInput("one weight per center required".into()));
        }
        region.validate()?;
        if centers.iter().any(|c| c.len() != region.dim()) || kernel.dim() != region.dim() {
            return Err(Error::DimensionMismatch {
                expected: region.dim(),
                got: kernel.dim(),
            });
        }
        Ok(Self {
            centers,
            weights,
            kernel,
            offset,
            region,
        })
    }

    /// `offset + sum_j w_j k(x, c_j)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.offset + self.unshifted(x)
    }

    fn unshifted(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * kernel_se(x, c, &self.kernel).expect("terrain dimensions validated"))
            .sum()
    }

    /// Shortest length-scale; sets the path sampling resolution.
    pub fn min_length_scale(&self) -> f64 {
        self.kernel.length_scales.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Values on the `n`-per-axis lattice (bounds included), lattice order.
    pub fn grid(&self, n: usize) -> Vec<(Vec<f64>, f64)> {
        self.region
            .lattice(n)
            .into_iter()
            .map(|p| {
                let v = self.evaluate(&p);
                (p, v)
            })
            .collect()
    }

    /// Mean of the terrain along the straight segment `a -> b` (trapezoidal
    /// rule with spacing at most `step`). A zero-length segment returns `f(b)`.
    pub fn segment_mean(&self, a: &[f64], b: &[f64], step: f64) -> f64 {
        let len = euclidean(a, b);
        if len == 0.0 {
            return self.evaluate(b);
        }
        let m = (len / step).ceil().max(1.0) as usize;
        let mut acc = 0.0;
        for i in 0..=m {
            let t = i as f64 / m as f64;
            let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += w * self.evaluate(&p);
        }
        acc / m as f64
    }
}

/// Draws a terrain: centers uniform in the region, standard-normal weights,
/// and an offset placing the audit-grid minimum at `floor`.
pub fn sample_terrain(
    seed: u64,
    region: &SearchRegion,
    n_centers: usize,
    kernel: &Hyperparams,
    floor: f64,
) -> Result<Terrain> {
    if n_centers == 0 {
        return Err(Error::InvalidInput("n_centers must be at least 1".into()));
    }
    region.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_centers)
        .map(|_| {
            (0..region.dim())
                .map(|k| rng.random_range(region.lower[k]..region.upper[k]))
                .collect()
        })
        .collect();
    let weights: Vec<f64> = (0..n_centers).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut t = Terrain::new(centers, weights, kernel.clone(), 0.0, region.clone())?;
    let min = region
        .lattice(AUDIT_GRID)
        .iter()
        .map(|p| t.unshifted(p))
        .fold(f64::INFINITY, f64::min);
    t.offset = floor - min;
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Execution noise standard deviation per axis.
    pub exec_sd: f64,
    /// Localisation noise standard deviation per axis.
    pub loc_sd: f64,
    /// Observation noise standard deviation.
    pub obs_sd: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            exec_sd: 0.0,
            loc_sd: 0.0,
            obs_sd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("exec_sd", self.exec_sd), ("loc_sd", self.loc_sd), ("obs_sd", self.obs_sd)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Where the robot actually ended up; hidden from the planner.
    pub true_loc: Vec<f64>,
    /// Localisation estimate `N(true + eps_l, loc_sd^2 I)`.
    pub est_input: GaussianInput,
    pub observation: f64,
    pub path_vibration: f64,
    pub path_length: f64,
    /// Set when the commanded target lay outside the region.
    pub clamped: bool,
}

fn gaussian(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("validated sd").sample(rng)
}

/// Drives in a straight line from `from_true` toward `target` and observes
/// the terrain at the (noisy) arrival point.
pub fn execute_step(
    terrain: &Terrain,
    from_true: &[f64],
    target: &[f64],
    noise: &NoiseModel,
    rng_seed: u64,
) -> Result<StepOutcome> {
    noise.validate()?;
    let region = &terrain.region;
    if target.len() != region.dim() || from_true.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: target.len(),
        });
    }
    let clamped = !region.contains(target);
    let target = region.clamp(target);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let reached: Vec<f64> = target.iter().map(|x| x + gaussian(&mut rng, noise.exec_sd)).collect();
    let true_loc = region.clamp(&reached);
    let observation = terrain.evaluate(&true_loc) + gaussian(&mut rng, noise.obs_sd);
    let est_mean: Vec<f64> = true_loc.iter().map(|x| x + gaussian(&mut rng, noise.loc_sd)).collect();
    let d = region.dim();
    let est_input = GaussianInput::new(
        nalgebra::DVector::from_vec(est_mean),
        DMatrix::from_diagonal_element(d, d, noise.loc_sd * noise.loc_sd),
    )?;
    let step = PATH_STEP_LENGTHSCALES * terrain.min_length_scale();
    Ok(StepOutcome {
        path_vibration: terrain.segment_mean(from_true, &true_loc, step),
        path_length: euclidean(from_true, &true_loc),
        true_loc,
        est_input,
        observation,
        clamped,
    })
}
