//! Offline replay: fit surrogates to logged (pose distribution, vibration)
//! records and score them against separately collected validation data.
//!
//! Observation files carry a full 2x2 pose covariance per row:
//!
//! ```text
//! x_mean,y_mean,cov_xx,cov_xy,cov_yy,vibration
//! ```
//!
//! Validation files hold precise locations:
//!
//! ```text
//! x,y,vibration
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::acquisition::SearchRegion;
use crate::artifacts::{csv_writer, fmt_f64};
use crate::driver::{rmse, wrmse, TerrainSpec};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, fit_posterior, Dataset, GaussianInput, GpPosterior, HyperBounds, Hyperparams};
use crate::sim::{sample_terrain, Terrain};

pub const OBSERVATION_HEADER: [&str; 6] = ["x_mean", "y_mean", "cov_xx", "cov_xy", "cov_yy", "vibration"];
pub const VALIDATION_HEADER: [&str; 3] = ["x", "y", "vibration"];

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    pub input: GaussianInput,
    pub vibration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub loc: [f64; 2],
    pub vibration: f64,
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let malformed = |line: usize, reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header {
        return Err(malformed(1, format!("expected header {}, got {}", header.join(","), got.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(malformed(line, format!("expected {} fields, got {}", header.len(), rec.len())));
        }
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| malformed(line, "non-numeric or non-finite field".into()))?;
        rows.push((line, vals));
    }
    if rows.is_empty() {
        return Err(malformed(1, "file has no data rows".into()));
    }
    Ok(rows)
}

pub fn read_observations(path: &Path) -> Result<Vec<ObservationRow>> {
    read_rows(path, &OBSERVATION_HEADER)?
        .into_iter()
        .map(|(line, v)| {
            let cov = DMatrix::from_row_slice(2, 2, &[v[2], v[3], v[3], v[4]]);
            let input = GaussianInput::new(DVector::from_vec(vec![v[0], v[1]]), cov).map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line,
                reason: e.to_string(),
            })?;
            Ok(ObservationRow {
                input,
                vibration: v[5],
            })
        })
        .collect()
}

pub fn read_validation(path: &Path) -> Result<Vec<ValidationRow>> {
    Ok(read_rows(path, &VALIDATION_HEADER)?
        .into_iter()
        .map(|(_, v)| ValidationRow {
            loc: [v[0], v[1]],
            vibration: v[2],
        })
        .collect())
}

pub fn write_observations(path: &Path, rows: &[ObservationRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(OBSERVATION_HEADER)?;
    for r in rows {
        let m = r.input.mean();
        let c = r.input.cov();
        w.write_record(
            [m[0], m[1], c[(0, 0)], c[(0, 1)], c[(1, 1)], r.vibration]
                .into_iter()
                .map(fmt_f64),
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_validation(path: &Path, rows: &[ValidationRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(VALIDATION_HEADER)?;
    for r in rows {
        w.write_record([r.loc[0], r.loc[1], r.vibration].into_iter().map(fmt_f64))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Pose covariances are kept (uncertain-input GP).
    Uncertain,
    /// Only pose means are used (standard GP).
    Deterministic,
}

impl InputMode {
    pub fn label(&self) -> &'static str {
        match self {
            InputMode::Uncertain => "uncertain",
            InputMode::Deterministic => "deterministic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplaySettings {
    pub init: Hyperparams,
    pub bounds: HyperBounds,
    /// Likelihood evaluations for hyperparameter fitting.
    pub fit_budget: usize,
}

#[derive(Debug, Clone)]
pub struct ReplayFit {
    pub mode: InputMode,
    pub posterior: GpPosterior,
    pub lml: f64,
    pub wrmse: f64,
    pub rmse: f64,
}

pub fn build_dataset(obs: &[ObservationRow], mode: InputMode) -> Result<Dataset> {
    let mut d = Dataset::new();
    for r in obs {
        let input = match mode {
            InputMode::Uncertain => r.input.clone(),
            InputMode::Deterministic => GaussianInput::deterministic(r.input.mean().as_slice()),
        };
        d.push(input, r.vibration)?;
    }
    Ok(d)
}

/// Refits hyperparameters by marginal likelihood, then fits the posterior.
pub fn fit_replay(obs: &[ObservationRow], mode: InputMode, settings: &ReplaySettings) -> Result<GpPosterior> {
    if obs.is_empty() {
        return Err(Error::InvalidInput("no observations to replay".into()));
    }
    let data = build_dataset(obs, mode)?;
    let hyper = fit_hyperparameters(&data, &settings.init, &settings.bounds, settings.fit_budget);
    fit_posterior(&data, &hyper)
}

/// `(wrmse, rmse)` of the posterior mean at the validation locations; the
/// WRMSE weights come from the validation vibration range.
pub fn score(post: &GpPosterior, validation: &[ValidationRow]) -> Result<(f64, f64)> {
    let mut pred = Vec::with_capacity(validation.len());
    for v in validation {
        pred.push(post.predict_mean(&GaussianInput::deterministic(&v.loc))?);
    }
    let truth: Vec<f64> = validation.iter().map(|v| v.vibration).collect();
    Ok((wrmse(&pred, &truth)?, rmse(&pred, &truth)?))
}

/// Fits both input modes and scores each.
pub fn run_replay(obs: &[ObservationRow], validation: &[ValidationRow], settings: &ReplaySettings) -> Result<Vec<ReplayFit>> {
    [InputMode::Uncertain, InputMode::Deterministic]
        .into_iter()
        .map(|mode| {
            let posterior = fit_replay(obs, mode, settings)?;
            let (wrmse, rmse) = score(&posterior, validation)?;
            Ok(ReplayFit {
                mode,
                lml: posterior.log_marginal_likelihood(),
                posterior,
                wrmse,
                rmse,
            })
        })
        .collect()
}

/// Bounding box of all observation means and validation locations.
pub fn bounding_region(obs: &[ObservationRow], validation: &[ValidationRow]) -> SearchRegion {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let pts = obs
        .iter()
        .map(|o| [o.input.mean()[0], o.input.mean()[1]])
        .chain(validation.iter().map(|v| v.loc));
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..2 {
        if !(hi[k] > lo[k]) {
            lo[k] -= 0.5;
            hi[k] += 0.5;
        }
    }
    SearchRegion {
        lower: lo.to_vec(),
        upper: hi.to_vec(),
    }
}

/// Writes `hyperparams.csv`, `validation.csv` and one
/// `posterior_<mode>.csv` grid dump (`x, y, mean, var`) per fit.
pub fn write_replay(dir: &Path, fits: &[ReplayFit], region: &SearchRegion, grid: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("hyperparams.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["mode", "signal_var", "length_scale_x", "length_scale_y", "noise_var", "mean_const", "lml"])?;
    for f in fits {
        let h = f.posterior.hyper();
        w.write_record([
            f.mode.label().to_string(),
            fmt_f64(h.signal_var),
            fmt_f64(h.length_scales[0]),
            fmt_f64(h.length_scales[1]),
            fmt_f64(h.noise_var),
            fmt_f64(h.mean_const),
            fmt_f64(f.lml),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("validation.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["mode", "wrmse", "rmse"])?;
    for f in fits {
        w.write_record([f.mode.label().to_string(), fmt_f64(f.wrmse), fmt_f64(f.rmse)])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    for f in fits {
        let path = dir.join(format!("posterior_{}.csv", f.mode.label()));
        let mut w = csv_writer(&path)?;
        w.write_record(["x", "y", "mean", "var"])?;
        for p in region.lattice(grid) {
            let (m, v) = f.posterior.predict_at(&p)?;
            w.write_record([p[0], p[1], m, v].into_iter().map(fmt_f64))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Parameters of a synthetic replay log: observations at uniformly random
/// true poses, logged with isotropic localisation error, and a noise-free
/// validation lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticReplay {
    pub region: SearchRegion,
    pub terrain: TerrainSpec,
    pub n_obs: usize,
    pub loc_sd: f64,
    pub obs_sd: f64,
    pub validation_grid: usize,
}

impl Default for SyntheticReplay {
    fn default() -> Self {
        Self {
            region: SearchRegion::square(0.0, 50.0, 2),
            terrain: TerrainSpec {
                n_centers: 80,
                kernel: Hyperparams::isotropic(1.0, 5.0, 2, 0.04, 0.0),
                floor: 0.5,
            },
            n_obs: 150,
            loc_sd: 3.0,
            obs_sd: 0.2,
            validation_grid: 30,
        }
    }
}

impl SyntheticReplay {
    pub fn generate(&self, seed: u64) -> Result<(Terrain, Vec<ObservationRow>, Vec<ValidationRow>)> {
        let terrain = sample_terrain(seed, &self.region, self.terrain.n_centers, &self.terrain.kernel, self.terrain.floor)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_A11);
        let ux = Uniform::new(self.region.lower[0], self.region.upper[0]).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let uy = Uniform::new(self.region.lower[1], self.region.upper[1]).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let loc = Normal::new(0.0, self.loc_sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let obs_noise = Normal::new(0.0, self.obs_sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let var = self.loc_sd * self.loc_sd;
        let mut obs = Vec::with_capacity(self.n_obs);
        for _ in 0..self.n_obs {
            let truth = [ux.sample(&mut rng), uy.sample(&mut rng)];
            let vibration = terrain.evaluate(&truth) + obs_noise.sample(&mut rng);
            let est = [truth[0] + loc.sample(&mut rng), truth[1] + loc.sample(&mut rng)];
            obs.push(ObservationRow {
                input: GaussianInput::isotropic(&est, var)?,
                vibration,
            });
        }
        let validation = self
            .region
            .lattice(self.validation_grid)
            .into_iter()
            .map(|p| ValidationRow {
                vibration: terrain.evaluate(&p),
                loc: [p[0], p[1]],
            })
            .collect();
        Ok((terrain, obs, validation))
    }

    /// Starting hyperparameters for fitting a log generated by this spec.
    pub fn initial_hyper(&self, obs: &[ObservationRow]) -> Hyperparams {
        let n = obs.len().max(1) as f64;
        let mean = obs.iter().map(|o| o.vibration).sum::<f64>() / n;
        let var = obs.iter().map(|o| (o.vibration - mean).powi(2)).sum::<f64>() / n;
        Hyperparams {
            signal_var: var.max(1e-6),
            length_scales: self.terrain.kernel.length_scales.clone(),
            noise_var: (self.obs_sd * self.obs_sd).max(1e-6),
            mean_const: mean,
        }
    }
}
