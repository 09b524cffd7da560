//! Acquisition functions and their maximisation over a box.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GaussianInput, GpPosterior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimise,
    Maximise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcqKind {
    Ducb,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcqConfig {
    /// Exploration weight on the posterior standard deviation.
    pub kappa: f64,
    /// Travel-distance penalty per unit length.
    pub gamma: f64,
    pub sense: Sense,
    pub kind: AcqKind,
}

impl AcqConfig {
    pub fn ducb(kappa: f64, gamma: f64) -> Self {
        Self {
            kappa,
            gamma,
            sense: Sense::Minimise,
            kind: AcqKind::Ducb,
        }
    }

    pub fn entropy() -> Self {
        Self {
            kappa: 0.0,
            gamma: 0.0,
            sense: Sense::Minimise,
            kind: AcqKind::Entropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    fn signed_mean(&self, mean: f64) -> f64 {
        match self.sense {
            Sense::Minimise => -mean,
            Sense::Maximise => mean,
        }
    }
}

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let r = Self { lower, upper };
        r.validate()?;
        Ok(r)
    }

    pub fn square(lo: f64, hi: f64, dim: usize) -> Self {
        Self {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidInput("region bounds must be nonempty and of equal length".into()));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::InvalidInput("region requires lower < upper componentwise".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (a, b))| v.clamp(*a, *b))
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// `n` evenly spaced points per axis including both bounds, axis 0 most
    /// significant.
    pub fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| {
                if n == 1 {
                    vec![0.5 * (self.lower[k] + self.upper[k])]
                } else {
                    (0..n)
                        .map(|i| self.lower[k] + self.width(k) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            })
            .collect();
        cartesian(&axes)
    }

    /// Centres of an `n`-per-axis cell grid, axis 0 most significant.
    pub fn cell_centres(&self, n: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| {
                let h = self.width(k) / n as f64;
                (0..n).map(|i| self.lower[k] + h * (i as f64 + 0.5)).collect()
            })
            .collect();
        cartesian(&axes)
    }
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Deterministic,
    Unscented,
    Distributional,
}

/// Scaled unscented transform parameters. `kappa = None` means `3 - d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnscentedParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: Option<f64>,
}

impl Default for UnscentedParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            kappa: None,
        }
    }
}

impl UnscentedParams {
    fn lambda(&self, d: usize) -> f64 {
        let d = d as f64;
        let kappa = self.kappa.unwrap_or(3.0 - d);
        self.alpha * self.alpha * (d + kappa) - d
    }

    /// Mean weights for the 2d+1 sigma points, centre first.
    pub fn weights(&self, d: usize) -> Vec<f64> {
        let lam = self.lambda(d);
        let n = d as f64 + lam;
        let mut w = vec![1.0 / (2.0 * n); 2 * d + 1];
        w[0] = lam / n;
        w
    }

    /// Sigma points `u`, `u + c_k`, `u - c_k` where `c_k` are the columns of
    /// the symmetric square root of `(d + lambda) cov`.
    pub fn sigma_points(&self, mean: &[f64], cov: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let d = mean.len();
        let scaled = cov * (d as f64 + self.lambda(d));
        let root = psd_sqrt(&scaled);
        let mut pts = Vec::with_capacity(2 * d + 1);
        pts.push(mean.to_vec());
        for sign in [1.0, -1.0] {
            for k in 0..d {
                pts.push((0..d).map(|i| mean[i] + sign * root[(i, k)]).collect());
            }
        }
        pts
    }
}

/// Symmetric square root of a PSD matrix; negative eigenvalues are floored
/// at zero.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == 0.0));
    if diagonal {
        return DMatrix::from_fn(d, d, |i, j| if i == j { m[(i, i)].max(0.0).sqrt() } else { 0.0 });
    }
    let eig = m.clone().symmetric_eigen();
    let s = DVector::from_iterator(d, eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose()
}

/// How a planner turns a target location into a query on its surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPolicy {
    pub mode: QueryMode,
    pub query_cov: DMatrix<f64>,
    pub ut: UnscentedParams,
}

impl QueryPolicy {
    pub fn deterministic(dim: usize) -> Self {
        Self {
            mode: QueryMode::Deterministic,
            query_cov: DMatrix::zeros(dim, dim),
            ut: UnscentedParams::default(),
        }
    }

    pub fn isotropic(mode: QueryMode, dim: usize, sd: f64) -> Self {
        Self {
            mode,
            query_cov: DMatrix::from_diagonal_element(dim, dim, sd * sd),
            ut: UnscentedParams::default(),
        }
    }

    pub fn query_input(&self, target: &[f64]) -> Result<GaussianInput> {
        GaussianInput::new(DVector::from_column_slice(target), self.query_cov.clone())
    }
}

/// Distance-based UCB at a deterministic location.
pub fn ducb(post: &GpPosterior, x: &[f64], last_loc: &[f64], cfg: &AcqConfig) -> Result<f64> {
    let (m, v) = post.predict_at(x)?;
    Ok(cfg.signed_mean(m) + cfg.kappa * v.sqrt() - cfg.gamma * euclidean(last_loc, x))
}

/// DUCB on the querying distribution `N(target, query_cov)`, with the
/// distance measured from the mean of the last location estimate.
pub fn ducb_uncertain(
    post: &GpPosterior,
    target: &[f64],
    policy: &QueryPolicy,
    last_mean: &[f64],
    cfg: &AcqConfig,
) -> Result<f64> {
    let q = policy.query_input(target)?;
    let (m, v) = post.predict(&q)?;
    Ok(cfg.signed_mean(m) + cfg.kappa * v.sqrt() - cfg.gamma * euclidean(last_mean, target))
}

/// Max-variance heuristic: returns the posterior variance at the input.
pub fn entropy_acq(post: &GpPosterior, input: &GaussianInput) -> Result<f64> {
    Ok(post.predict(input)?.1)
}

/// Unscented average of a deterministic-input acquisition over
/// `N(target, query_cov)`.
pub fn unscented_acq<F>(mut base: F, target: &[f64], policy: &QueryPolicy) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let pts = policy.ut.sigma_points(target, &policy.query_cov);
    let w = policy.ut.weights(target.len());
    let mut acc = 0.0;
    for (p, wk) in pts.iter().zip(&w) {
        acc += wk * base(p)?;
    }
    Ok(acc)
}

/// Grid scan followed by coordinate pattern search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximiserConfig {
    pub grid_per_axis: usize,
    pub max_steps: usize,
    /// Stop once every step falls below this fraction of the region width.
    pub min_step_frac: f64,
}

impl Default for MaximiserConfig {
    fn default() -> Self {
        Self {
            grid_per_axis: 50,
            max_steps: 100,
            min_step_frac: 1e-4,
        }
    }
}

/// Maximises `eval` over `region`. Grid ties go to the lowest lexicographic
/// index; the refinement only moves on strict improvement, so the result is
/// never worse than the best grid point.
pub fn maximise_acq<F>(mut eval: F, region: &SearchRegion, cfg: &MaximiserConfig) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if cfg.grid_per_axis == 0 {
        return Err(Error::InvalidInput("grid_per_axis must be at least 1".into()));
    }
    let d = region.dim();
    let mut best = region.center();
    let mut best_val = f64::NEG_INFINITY;
    let mut found = false;
    for p in region.cell_centres(cfg.grid_per_axis) {
        let v = eval(&p)?;
        if !found || v > best_val {
            best_val = v;
            best = p;
            found = true;
        }
    }

    let mut steps: Vec<f64> = (0..d).map(|k| region.width(k) / cfg.grid_per_axis as f64).collect();
    let min_steps: Vec<f64> = (0..d).map(|k| region.width(k) * cfg.min_step_frac).collect();
    for _ in 0..cfg.max_steps {
        if steps.iter().zip(&min_steps).all(|(s, m)| s < m) {
            break;
        }
        let mut cand_best: Option<(Vec<f64>, f64)> = None;
        for k in 0..d {
            for sign in [1.0, -1.0] {
                let mut c = best.clone();
                c[k] = (c[k] + sign * steps[k]).clamp(region.lower[k], region.upper[k]);
                if c[k] == best[k] {
                    continue;
                }
                let v = eval(&c)?;
                let better = match &cand_best {
                    Some((_, bv)) => v > *bv,
                    None => true,
                };
                if better {
                    cand_best = Some((c, v));
                }
            }
        }
        match cand_best {
            Some((c, v)) if v > best_val => {
                best = c;
                best_val = v;
            }
            _ => steps.iter_mut().for_each(|s| *s *= 0.5),
        }
    }
    Ok(best)
}
