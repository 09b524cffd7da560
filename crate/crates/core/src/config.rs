//! Run configuration: a TOML file with one table per concern and one
//! `[[method]]` entry per compared method.
//!
//! Every section is optional; missing values fall back to the simulation
//! defaults (10x10 region, sigma_e = sigma_l = 0.07, sigma_x = 0.1,
//! sigma_n = 0.1, kappa = 10, gamma = 1, 30 trials of 50 iterations,
//! and the six standard methods).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcqConfig, AcqKind, MaximiserConfig, SearchRegion, Sense};
use crate::driver::{standard_methods, BenchmarkSetup, MethodSpec, Planner, RefitSettings, TerrainSpec};
use crate::error::{Error, Result};
use crate::gp::{HyperBounds, Hyperparams};
use crate::replay::{ObservationRow, ReplaySettings, SyntheticReplay};
use crate::sim::NoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            lower: vec![0.0, 0.0],
            upper: vec![10.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainConfig {
    pub centers: usize,
    pub signal_var: f64,
    pub length_scale: f64,
    pub floor: f64,
    /// Lattice resolution of the per-trial terrain dumps.
    pub dump_grid: usize,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            centers: 80,
            signal_var: 16.0,
            length_scale: 0.5,
            floor: 0.5,
            dump_grid: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    pub signal_var: f64,
    pub length_scales: Vec<f64>,
    pub noise_var: f64,
    /// Constant prior mean; omitted means "use the terrain's constant offset".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_const: Option<f64>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            signal_var: 16.0,
            length_scales: vec![0.5, 0.5],
            noise_var: 0.01,
            mean_const: None,
        }
    }
}

impl GpConfig {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            signal_var: self.signal_var,
            length_scales: self.length_scales.clone(),
            noise_var: self.noise_var,
            mean_const: self.mean_const.unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub exec_sd: f64,
    pub loc_sd: f64,
    pub obs_sd: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            exec_sd: 0.07,
            loc_sd: 0.07,
            obs_sd: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueryConfig {
    /// Per-axis standard deviation of the querying distribution.
    pub sd: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self { sd: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub kappa: f64,
    pub gamma: f64,
    pub grid: usize,
    pub pattern_steps: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            kappa: 10.0,
            gamma: 1.0,
            grid: 50,
            pattern_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub budget: usize,
    pub seed: u64,
    pub eval_grid: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 30,
            budget: 50,
            seed: 2024,
            eval_grid: 100,
        }
    }
}

/// Hyperparameter re-learning by marginal likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefitConfig {
    /// Default refit period for methods that don't set their own; 0 = fixed.
    pub every: usize,
    /// Likelihood evaluations per refit.
    pub budget: usize,
    /// Positive hyperparameters are bounded to `[init / factor, init * factor]`.
    pub bounds_factor: f64,
    /// The prior mean is bounded to `init +- mean_radius`.
    pub mean_radius: f64,
}

impl Default for RefitConfig {
    fn default() -> Self {
        Self {
            every: 0,
            budget: 80,
            bounds_factor: 10.0,
            mean_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub planner: Planner,
    pub acquisition: AcqKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refit_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub region: RegionConfig,
    pub terrain: TerrainConfig,
    pub gp: GpConfig,
    pub noise: NoiseConfig,
    pub query: QueryConfig,
    pub acquisition: AcquisitionConfig,
    pub experiment: ExperimentConfig,
    pub refit: RefitConfig,
    #[serde(rename = "method", skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<MethodConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: None,
            region: RegionConfig::default(),
            terrain: TerrainConfig::default(),
            gp: GpConfig::default(),
            noise: NoiseConfig::default(),
            query: QueryConfig::default(),
            acquisition: AcquisitionConfig::default(),
            experiment: ExperimentConfig::default(),
            refit: RefitConfig::default(),
            methods: default_method_configs(),
        }
    }
}

pub fn default_method_configs() -> Vec<MethodConfig> {
    let mut out = Vec::new();
    for acquisition in [AcqKind::Ducb, AcqKind::Entropy] {
        for planner in [Planner::Standard, Planner::Unscented, Planner::UncertainInputs] {
            out.push(MethodConfig {
                name: None,
                planner,
                acquisition,
                kappa: None,
                gamma: None,
                refit_every: None,
            });
        }
    }
    out
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a non-negative finite number, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::ConfigParse(msg) => Error::ConfigParse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn dim(&self) -> usize {
        self.region.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.region.lower.len();
        if d != 2 || self.region.upper.len() != 2 {
            return Err(Error::config("region", "lower and upper must both have two entries"));
        }
        for k in 0..d {
            let (a, b) = (self.region.lower[k], self.region.upper[k]);
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::config(format!("region.lower[{k}]"), "must be finite and below region.upper"));
            }
        }
        at_least("terrain.centers", self.terrain.centers, 1)?;
        positive("terrain.signal_var", self.terrain.signal_var)?;
        positive("terrain.length_scale", self.terrain.length_scale)?;
        non_negative("terrain.floor", self.terrain.floor)?;
        at_least("terrain.dump_grid", self.terrain.dump_grid, 2)?;

        positive("gp.signal_var", self.gp.signal_var)?;
        positive("gp.noise_var", self.gp.noise_var)?;
        if self.gp.length_scales.len() != d {
            return Err(Error::config("gp.length_scales", format!("needs {d} entries")));
        }
        for (i, l) in self.gp.length_scales.iter().enumerate() {
            positive(&format!("gp.length_scales[{i}]"), *l)?;
        }
        if let Some(m) = self.gp.mean_const {
            if !m.is_finite() {
                return Err(Error::config("gp.mean_const", "must be finite"));
            }
        }

        non_negative("noise.exec_sd", self.noise.exec_sd)?;
        non_negative("noise.loc_sd", self.noise.loc_sd)?;
        non_negative("noise.obs_sd", self.noise.obs_sd)?;
        non_negative("query.sd", self.query.sd)?;
        non_negative("acquisition.kappa", self.acquisition.kappa)?;
        non_negative("acquisition.gamma", self.acquisition.gamma)?;
        at_least("acquisition.grid", self.acquisition.grid, 1)?;

        at_least("experiment.trials", self.experiment.trials, 1)?;
        at_least("experiment.budget", self.experiment.budget, 1)?;
        at_least("experiment.eval_grid", self.experiment.eval_grid, 2)?;

        at_least("refit.budget", self.refit.budget, 1)?;
        if !(self.refit.bounds_factor >= 1.0 && self.refit.bounds_factor.is_finite()) {
            return Err(Error::config("refit.bounds_factor", "must be >= 1"));
        }
        non_negative("refit.mean_radius", self.refit.mean_radius)?;

        if self.methods.is_empty() {
            return Err(Error::config("method", "at least one [[method]] is required"));
        }
        let mut names = std::collections::HashSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            if let Some(k) = m.kappa {
                non_negative(&format!("method[{i}].kappa"), k)?;
            }
            if let Some(g) = m.gamma {
                non_negative(&format!("method[{i}].gamma"), g)?;
            }
            let name = self.method_name(m);
            if name.is_empty() || name.contains(['/', '\\', ',']) {
                return Err(Error::config(format!("method[{i}].name"), "must be nonempty without '/', '\\' or ','"));
            }
            if !names.insert(name.clone()) {
                return Err(Error::config(format!("method[{i}].name"), format!("duplicate method name {name}")));
            }
        }
        Ok(())
    }

    fn method_name(&self, m: &MethodConfig) -> String {
        m.name
            .clone()
            .unwrap_or_else(|| crate::driver::method_label(m.planner, m.acquisition))
    }

    pub fn region(&self) -> SearchRegion {
        SearchRegion {
            lower: self.region.lower.clone(),
            upper: self.region.upper.clone(),
        }
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            exec_sd: self.noise.exec_sd,
            loc_sd: self.noise.loc_sd,
            obs_sd: self.noise.obs_sd,
        }
    }

    pub fn maximiser(&self) -> MaximiserConfig {
        MaximiserConfig {
            grid_per_axis: self.acquisition.grid,
            max_steps: self.acquisition.pattern_steps,
            ..MaximiserConfig::default()
        }
    }

    pub fn method_specs(&self) -> Vec<MethodSpec> {
        let d = self.dim();
        let budget = self.experiment.budget;
        if self.methods.is_empty() {
            return standard_methods(self.acquisition.kappa, self.acquisition.gamma, self.query.sd, d, budget);
        }
        self.methods
            .iter()
            .map(|m| {
                let acq = match m.acquisition {
                    AcqKind::Ducb => AcqConfig {
                        kappa: m.kappa.unwrap_or(self.acquisition.kappa),
                        gamma: m.gamma.unwrap_or(self.acquisition.gamma),
                        sense: Sense::Minimise,
                        kind: AcqKind::Ducb,
                    },
                    AcqKind::Entropy => AcqConfig::entropy(),
                };
                let mut spec = MethodSpec::new(m.planner, acq, self.query.sd, d, budget);
                spec.name = self.method_name(m);
                spec.refit_every = m.refit_every.unwrap_or(self.refit.every);
                spec
            })
            .collect()
    }

    pub fn refit_bounds(&self, init: &Hyperparams) -> HyperBounds {
        HyperBounds::around(init, self.refit.bounds_factor, self.refit.mean_radius)
    }

    /// Replay fitting starts from the `[gp]` values; an unset mean starts
    /// at the mean logged vibration.
    pub fn replay_settings(&self, obs: &[ObservationRow]) -> ReplaySettings {
        let mut init = self.gp.hyperparams();
        if self.gp.mean_const.is_none() && !obs.is_empty() {
            init.mean_const = obs.iter().map(|o| o.vibration).sum::<f64>() / obs.len() as f64;
        }
        ReplaySettings {
            bounds: self.refit_bounds(&init),
            init,
            fit_budget: self.refit.budget,
        }
    }

    /// Config for replaying a log produced by `synth`.
    pub fn for_synthetic_replay(synth: &SyntheticReplay, obs: &[ObservationRow]) -> Self {
        let init = synth.initial_hyper(obs);
        let mut cfg = RunConfig::default();
        cfg.region = RegionConfig {
            lower: synth.region.lower.clone(),
            upper: synth.region.upper.clone(),
        };
        cfg.gp = GpConfig {
            signal_var: init.signal_var,
            length_scales: init.length_scales,
            noise_var: init.noise_var,
            mean_const: None,
        };
        cfg.terrain.centers = synth.terrain.n_centers;
        cfg.terrain.signal_var = synth.terrain.kernel.signal_var;
        cfg.terrain.length_scale = synth.terrain.kernel.length_scales[0];
        cfg.terrain.floor = synth.terrain.floor;
        cfg.noise.loc_sd = synth.loc_sd;
        cfg.noise.obs_sd = synth.obs_sd;
        cfg.refit.budget = 150;
        cfg
    }

    pub fn benchmark_setup(&self) -> BenchmarkSetup {
        let d = self.dim();
        let methods = self.method_specs();
        let needs_refit = methods.iter().any(|m| m.refit_every > 0);
        let gp = self.gp.hyperparams();
        BenchmarkSetup {
            region: self.region(),
            terrain: TerrainSpec {
                n_centers: self.terrain.centers,
                kernel: Hyperparams::isotropic(self.terrain.signal_var, self.terrain.length_scale, d, self.gp.noise_var, 0.0),
                floor: self.terrain.floor,
            },
            refit: needs_refit.then(|| RefitSettings {
                bounds: self.refit_bounds(&gp),
                budget: self.refit.budget,
            }),
            gp,
            gp_mean_from_terrain: self.gp.mean_const.is_none(),
            noise: self.noise(),
            methods,
            trials: self.experiment.trials,
            base_seed: self.experiment.seed,
            eval_grid: self.experiment.eval_grid,
            maximiser: self.maximiser(),
        }
    }
}
