//! Exploration episodes, evaluation metrics and multi-trial benchmarks.
//!
//! Three planners are compared, each paired with either DUCB or the
//! max-variance ("ES") heuristic:
//!
//! | planner            | surrogate inputs          | query at target            |
//! |--------------------|---------------------------|----------------------------|
//! | `Standard` (BO)    | estimate means, zero cov  | deterministic point        |
//! | `Unscented` (UBO)  | estimate means, zero cov  | sigma-point average        |
//! | `UncertainInputs`  | full localisation Gaussian| querying distribution      |
//!
//! All methods in a trial share the terrain, the start location and the
//! per-iteration noise seeds, so differences between them are paired.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    ducb, ducb_uncertain, entropy_acq, maximise_acq, unscented_acq, AcqConfig, AcqKind, MaximiserConfig,
    QueryMode, QueryPolicy, SearchRegion,
};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, fit_posterior, Dataset, GaussianInput, GpPosterior, HyperBounds, Hyperparams};
use crate::sim::{execute_step, sample_terrain, NoiseModel, Terrain};
use crate::stats::MeanSd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    Standard,
    Unscented,
    UncertainInputs,
}

impl Planner {
    pub fn label(&self) -> &'static str {
        match self {
            Planner::Standard => "BO",
            Planner::Unscented => "UBO",
            Planner::UncertainInputs => "UIBO",
        }
    }

    fn query_mode(&self) -> QueryMode {
        match self {
            Planner::Standard => QueryMode::Deterministic,
            Planner::Unscented => QueryMode::Unscented,
            Planner::UncertainInputs => QueryMode::Distributional,
        }
    }
}

pub fn method_label(planner: Planner, kind: AcqKind) -> String {
    let k = match kind {
        AcqKind::Ducb => "DUCB",
        AcqKind::Entropy => "ES",
    };
    format!("{}-{}", planner.label(), k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub planner: Planner,
    pub acq: AcqConfig,
    pub query: QueryPolicy,
    /// Refit hyperparameters every this many iterations; 0 keeps them fixed.
    pub refit_every: usize,
    pub budget: usize,
}

impl MethodSpec {
    /// Standard naming and query policy for a planner: the querying
    /// distribution is `N(target, query_sd^2 I)` for UBO and UIBO and a point
    /// for BO.
    pub fn new(planner: Planner, acq: AcqConfig, query_sd: f64, dim: usize, budget: usize) -> Self {
        let query = match planner {
            Planner::Standard => QueryPolicy::deterministic(dim),
            _ => QueryPolicy::isotropic(planner.query_mode(), dim, query_sd),
        };
        Self {
            name: method_label(planner, acq.kind),
            planner,
            acq,
            query,
            refit_every: 0,
            budget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidInput(format!("method {}: budget must be >= 1", self.name)));
        }
        self.acq.validate()
    }
}

/// The six simulation variants in table order.
pub fn standard_methods(kappa: f64, gamma: f64, query_sd: f64, dim: usize, budget: usize) -> Vec<MethodSpec> {
    let mut out = Vec::new();
    for acq in [AcqConfig::ducb(kappa, gamma), AcqConfig::entropy()] {
        for planner in [Planner::Standard, Planner::Unscented, Planner::UncertainInputs] {
            out.push(MethodSpec::new(planner, acq, query_sd, dim, budget));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefitSettings {
    pub bounds: HyperBounds,
    pub budget: usize,
}

/// Everything an episode needs besides the method and the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeContext {
    pub hyper: Hyperparams,
    pub maximiser: MaximiserConfig,
    pub refit: Option<RefitSettings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub target: Vec<f64>,
    pub true_loc: Vec<f64>,
    pub est_input: GaussianInput,
    pub observation: f64,
    pub path_length: f64,
    pub path_vibration: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub terrain_seed: u64,
    pub method: String,
    pub planner: Planner,
    pub start: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub final_hyper: Hyperparams,
    pub metrics: Option<MetricSet>,
}

impl TrialRecord {
    /// The dataset the planner's surrogate was trained on.
    pub fn dataset(&self) -> Dataset {
        self.iterations
            .iter()
            .map(|it| (surrogate_input(self.planner, &it.est_input), it.observation))
            .collect()
    }

    pub fn final_posterior(&self) -> Result<GpPosterior> {
        fit_posterior(&self.dataset(), &self.final_hyper)
    }

    pub fn distance(&self) -> f64 {
        self.iterations.iter().map(|it| it.path_length).sum()
    }

    /// Length-weighted mean vibration over the episode; falls back to the
    /// plain mean when the robot never moved.
    pub fn mean_vibration(&self) -> f64 {
        let total: f64 = self.distance();
        if total > 0.0 {
            self.iterations.iter().map(|it| it.path_length * it.path_vibration).sum::<f64>() / total
        } else if self.iterations.is_empty() {
            0.0
        } else {
            self.iterations.iter().map(|it| it.path_vibration).sum::<f64>() / self.iterations.len() as f64
        }
    }
}

fn surrogate_input(planner: Planner, est: &GaussianInput) -> GaussianInput {
    match planner {
        Planner::UncertainInputs => est.clone(),
        _ => GaussianInput::deterministic(est.mean().as_slice()),
    }
}

/// Mixes a base seed with stream identifiers (SplitMix64 finaliser).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Picks the next target for `method` given the current posterior.
pub fn choose_target(
    post: &GpPosterior,
    method: &MethodSpec,
    last_est: &[f64],
    region: &SearchRegion,
    maximiser: &MaximiserConfig,
) -> Result<Vec<f64>> {
    let cfg = &method.acq;
    let policy = &method.query;
    match (method.planner, cfg.kind) {
        (Planner::Standard, AcqKind::Ducb) => maximise_acq(|x| ducb(post, x, last_est, cfg), region, maximiser),
        (Planner::Standard, AcqKind::Entropy) => {
            maximise_acq(|x| entropy_acq(post, &GaussianInput::deterministic(x)), region, maximiser)
        }
        (Planner::Unscented, AcqKind::Ducb) => {
            let inner = AcqConfig { gamma: 0.0, ..*cfg };
            maximise_acq(
                |x| {
                    let avg = unscented_acq(|p| ducb(post, p, p, &inner), x, policy)?;
                    Ok(avg - cfg.gamma * crate::acquisition::euclidean(last_est, x))
                },
                region,
                maximiser,
            )
        }
        (Planner::Unscented, AcqKind::Entropy) => maximise_acq(
            |x| unscented_acq(|p| entropy_acq(post, &GaussianInput::deterministic(p)), x, policy),
            region,
            maximiser,
        ),
        (Planner::UncertainInputs, AcqKind::Ducb) => {
            maximise_acq(|x| ducb_uncertain(post, x, policy, last_est, cfg), region, maximiser)
        }
        (Planner::UncertainInputs, AcqKind::Entropy) => {
            maximise_acq(|x| entropy_acq(post, &policy.query_input(x)?), region, maximiser)
        }
    }
}

/// Runs one exploration episode of `method.budget` iterations.
pub fn run_episode(
    terrain: &Terrain,
    method: &MethodSpec,
    noise: &NoiseModel,
    start: &[f64],
    ctx: &EpisodeContext,
    seed: u64,
) -> Result<TrialRecord> {
    method.validate()?;
    noise.validate()?;
    ctx.hyper.validate()?;
    let region = &terrain.region;
    if start.len() != region.dim() || !region.contains(start) {
        return Err(Error::InvalidInput("start must lie inside the region".into()));
    }
    let fail = |iteration: usize| move |e: Error| Error::EpisodeFailed {
        iteration,
        source: Box::new(e),
    };

    let mut data = Dataset::new();
    let mut hyper = ctx.hyper.clone();
    let mut true_pos = start.to_vec();
    let mut last_est = start.to_vec();
    let mut iterations = Vec::with_capacity(method.budget);
    for t in 0..method.budget {
        let post = fit_posterior(&data, &hyper).map_err(fail(t))?;
        let target = choose_target(&post, method, &last_est, region, &ctx.maximiser).map_err(fail(t))?;
        let out = execute_step(terrain, &true_pos, &target, noise, derive_seed(seed, t as u64, 0)).map_err(fail(t))?;
        data.push(surrogate_input(method.planner, &out.est_input), out.observation)
            .map_err(fail(t))?;
        if let Some(refit) = &ctx.refit {
            if method.refit_every > 0 && (t + 1) % method.refit_every == 0 {
                hyper = fit_hyperparameters(&data, &hyper, &refit.bounds, refit.budget);
            }
        }
        true_pos = out.true_loc.clone();
        last_est = out.est_input.mean().as_slice().to_vec();
        iterations.push(IterationRecord {
            target,
            true_loc: out.true_loc,
            est_input: out.est_input,
            observation: out.observation,
            path_length: out.path_length,
            path_vibration: out.path_vibration,
            clamped: out.clamped,
        });
    }
    Ok(TrialRecord {
        terrain_seed: 0,
        method: method.name.clone(),
        planner: method.planner,
        start: start.to_vec(),
        iterations,
        final_hyper: hyper,
        metrics: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub rmse: f64,
    pub wrmse: f64,
    pub distance: f64,
    pub mean_vibration: f64,
    pub relative_vibration: f64,
}

fn check_fields(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty field".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_fields(pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((s / truth.len() as f64).sqrt())
}

/// RMSE with per-point weights `(max f - f_i) / (max f - min f)`, which
/// emphasise errors where the truth is low.
pub fn wrmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_fields(pred, truth)?;
    let max = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = truth.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !(range > 0.0) {
        return Err(Error::DegenerateTruthRange);
    }
    let s: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let e = (p - t) * (max - t) / range;
            e * e
        })
        .sum();
    Ok((s / truth.len() as f64).sqrt())
}

/// Scores a finished episode on an `eval_grid`-per-axis lattice.
/// `baseline_vibration = None` reports a relative vibration of 1.
pub fn compute_metrics(
    record: &TrialRecord,
    terrain: &Terrain,
    eval_grid: usize,
    baseline_vibration: Option<f64>,
) -> Result<MetricSet> {
    let post = record.final_posterior()?;
    let grid = terrain.region.lattice(eval_grid);
    let mut pred = Vec::with_capacity(grid.len());
    let mut truth = Vec::with_capacity(grid.len());
    for p in &grid {
        pred.push(post.predict_mean(&GaussianInput::deterministic(p))?);
        truth.push(terrain.evaluate(p));
    }
    let mean_vibration = record.mean_vibration();
    let relative_vibration = match baseline_vibration {
        None => 1.0,
        Some(b) if b > 0.0 && b.is_finite() => mean_vibration / b,
        Some(_) => return Err(Error::InvalidBaseline),
    };
    Ok(MetricSet {
        rmse: rmse(&pred, &truth)?,
        wrmse: wrmse(&pred, &truth)?,
        distance: record.distance(),
        mean_vibration,
        relative_vibration,
    })
}

/// Terrain generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSpec {
    pub n_centers: usize,
    pub kernel: Hyperparams,
    pub floor: f64,
}

/// Shared configuration for a benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSetup {
    pub region: SearchRegion,
    pub terrain: TerrainSpec,
    /// GP hyperparameters shared by every method.
    pub gp: Hyperparams,
    /// Replace `gp.mean_const` by each terrain's constant offset.
    pub gp_mean_from_terrain: bool,
    pub noise: NoiseModel,
    pub methods: Vec<MethodSpec>,
    pub trials: usize,
    pub base_seed: u64,
    pub eval_grid: usize,
    pub maximiser: MaximiserConfig,
    pub refit: Option<RefitSettings>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub terrain_seed: u64,
    pub start: Vec<f64>,
    pub terrain: Terrain,
    /// One entry per method, in `methods` order. Failures carry the message.
    pub records: Vec<std::result::Result<TrialRecord, String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub rmse: MeanSd,
    pub wrmse: MeanSd,
    pub distance: MeanSd,
    pub mean_vibration: MeanSd,
    pub relative_vibration: MeanSd,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub methods: Vec<String>,
    pub trials: Vec<TrialOutcome>,
    pub summary: Vec<MethodSummary>,
    /// `curves[m][t]`: mean and sd over trials of the vibration experienced
    /// on iteration `t` by method `m`.
    pub curves: Vec<Vec<MeanSd>>,
}

impl BenchmarkResult {
    /// Per-trial values of one metric for `method`; failed trials are `NaN`.
    pub fn metric_column(&self, method: &str, f: impl Fn(&MetricSet) -> f64) -> Vec<f64> {
        let Some(idx) = self.methods.iter().position(|m| m == method) else {
            return Vec::new();
        };
        self.trials
            .iter()
            .map(|t| match &t.records[idx] {
                Ok(r) => r.metrics.as_ref().map(&f).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            })
            .collect()
    }

    pub fn summary_for(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

const BASELINE: &str = "BO-ES";

/// Starting location for a trial, uniform in the region.
pub fn trial_start(region: &SearchRegion, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..region.dim())
        .map(|k| rng.random_range(region.lower[k]..region.upper[k]))
        .collect()
}

/// Runs one trial: every method on the same terrain, start and noise seeds.
pub fn run_trial(setup: &BenchmarkSetup, trial: usize) -> Result<TrialOutcome> {
    let terrain_seed = derive_seed(setup.base_seed, trial as u64, 1);
    let terrain = sample_terrain(
        terrain_seed,
        &setup.region,
        setup.terrain.n_centers,
        &setup.terrain.kernel,
        setup.terrain.floor,
    )?;
    let start = trial_start(&setup.region, derive_seed(setup.base_seed, trial as u64, 2));
    let episode_seed = derive_seed(setup.base_seed, trial as u64, 3);
    let mut hyper = setup.gp.clone();
    if setup.gp_mean_from_terrain {
        hyper.mean_const = terrain.offset;
    }
    let ctx = EpisodeContext {
        hyper,
        maximiser: setup.maximiser,
        refit: setup.refit.clone(),
    };

    let mut records: Vec<std::result::Result<TrialRecord, String>> = setup
        .methods
        .iter()
        .map(|m| {
            run_episode(&terrain, m, &setup.noise, &start, &ctx, episode_seed)
                .map(|mut r| {
                    r.terrain_seed = terrain_seed;
                    r
                })
                .map_err(|e| e.to_string())
        })
        .collect();

    let baseline = match setup.methods.iter().position(|m| m.name == BASELINE) {
        None => Some(None),
        Some(i) => records[i].as_ref().ok().map(|r| Some(r.mean_vibration())),
    };
    for rec in records.iter_mut() {
        let scored = match rec {
            Ok(r) => match baseline {
                Some(b) => compute_metrics(r, &terrain, setup.eval_grid, b).map(|m| r.metrics = Some(m)),
                // baseline failed: score everything except the relative metric
                None => compute_metrics(r, &terrain, setup.eval_grid, None).map(|mut m| {
                    m.relative_vibration = f64::NAN;
                    r.metrics = Some(m);
                }),
            },
            Err(_) => Ok(()),
        };
        if let Err(e) = scored {
            *rec = Err(e.to_string());
        }
    }
    Ok(TrialOutcome {
        trial,
        terrain_seed,
        start,
        terrain,
        records,
    })
}

/// Runs `setup.trials` trials (in parallel when the `parallel` feature is
/// on) and aggregates per-method statistics in trial order.
pub fn run_benchmark(setup: &BenchmarkSetup) -> Result<BenchmarkResult> {
    if setup.trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    for m in &setup.methods {
        m.validate()?;
    }
    let trials: Vec<TrialOutcome> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..setup.trials)
                .into_par_iter()
                .map(|t| run_trial(setup, t))
                .collect::<Result<Vec<_>>>()?
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..setup.trials).map(|t| run_trial(setup, t)).collect::<Result<Vec<_>>>()?
        }
    };
    Ok(aggregate(setup, trials))
}

fn aggregate(setup: &BenchmarkSetup, trials: Vec<TrialOutcome>) -> BenchmarkResult {
    let methods: Vec<String> = setup.methods.iter().map(|m| m.name.clone()).collect();
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for (idx, spec) in setup.methods.iter().enumerate() {
        let ok: Vec<&TrialRecord> = trials.iter().filter_map(|t| t.records[idx].as_ref().ok()).collect();
        let metric = |f: fn(&MetricSet) -> f64| MeanSd::of(ok.iter().filter_map(|r| r.metrics.as_ref().map(f)));
        summary.push(MethodSummary {
            method: spec.name.clone(),
            rmse: metric(|m| m.rmse),
            wrmse: metric(|m| m.wrmse),
            distance: metric(|m| m.distance),
            mean_vibration: metric(|m| m.mean_vibration),
            relative_vibration: metric(|m| m.relative_vibration),
            failures: trials.len() - ok.len(),
        });
        curves.push(
            (0..spec.budget)
                .map(|t| MeanSd::of(ok.iter().filter_map(|r| r.iterations.get(t).map(|it| it.path_vibration))))
                .collect(),
        );
    }
    BenchmarkResult {
        methods,
        trials,
        summary,
        curves,
    }
}
