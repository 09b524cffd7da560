//! Gaussian process regression over deterministic and Gaussian-distributed
//! inputs.
//!
//! Every input is a [`GaussianInput`]: a mean location together with a
//! covariance. A deterministic location is simply an input whose covariance
//! is the zero matrix, in which case the expected squared-exponential kernel
//! collapses onto the ordinary squared-exponential kernel and the posterior
//! reduces to textbook GP regression.
//!
//! The expected kernel between two Gaussian inputs `N(u_i, S_i)` and
//! `N(u_j, S_j)` is
//!
//! ```text
//! k_p = sf2 * exp(-0.5 * r' (W + S_i + S_j)^-1 r) / |I + W^-1 (S_i + S_j) (1 - delta_ij)|^0.5
//! ```
//!
//! with `r = u_i - u_j` and `W = diag(lambda^2)`. The Kronecker delta is
//! applied on *index identity* (the same dataset entry, or the same query
//! instance), never on numerical equality of two distributions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry slack accepted for input covariances.
const SYMMETRY_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for a PSD input covariance.
const PSD_TOL: f64 = 1e-10;
/// Negative posterior variance within this slack is clamped to zero.
const VARIANCE_SLACK: f64 = 1e-9;

/// Relative jitter levels (times the signal variance) tried when the Gram
/// matrix is not numerically positive-definite.
pub const JITTER_SEQUENCE: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq)]
enum CovShape {
    Zero,
    Diagonal,
    Full,
}

/// A Gaussian distribution over an input location.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianInput {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    shape: CovShape,
}

impl GaussianInput {
    /// Validates symmetry and positive-semidefiniteness of `cov`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidInput("input dimension must be at least 1".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows().max(cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input mean or covariance".into()));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let shape = classify(&cov);
        if shape != CovShape::Zero {
            let min_eig = cov
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -PSD_TOL {
                return Err(Error::InvalidInput(format!(
                    "covariance is not positive-semidefinite (eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(Self { mean, cov, shape })
    }

    pub fn deterministic(mean: &[f64]) -> Self {
        let d = mean.len();
        Self {
            mean: DVector::from_column_slice(mean),
            cov: DMatrix::zeros(d, d),
            shape: CovShape::Zero,
        }
    }

    /// `N(mean, var * I)`; `var` must be non-negative.
    pub fn isotropic(mean: &[f64], var: f64) -> Result<Self> {
        if !(var >= 0.0) {
            return Err(Error::InvalidInput(format!("isotropic variance {var} is negative")));
        }
        let d = mean.len();
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_diagonal_element(d, d, var),
        )
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_deterministic(&self) -> bool {
        self.shape == CovShape::Zero
    }
}

fn classify(cov: &DMatrix<f64>) -> CovShape {
    let d = cov.nrows();
    let mut diagonal = true;
    let mut zero = true;
    for j in 0..d {
        for i in 0..d {
            let v = cov[(i, j)];
            if v != 0.0 {
                zero = false;
                if i != j {
                    diagonal = false;
                }
            }
        }
    }
    if zero {
        CovShape::Zero
    } else if diagonal {
        CovShape::Diagonal
    } else {
        CovShape::Full
    }
}

/// Squared-exponential kernel hyperparameters plus the constant prior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Signal variance `sf2`.
    pub signal_var: f64,
    /// One length-scale per input dimension (`W = diag(lambda_i^2)`).
    pub length_scales: Vec<f64>,
    /// Observation noise variance `sn2`.
    pub noise_var: f64,
    /// Constant prior mean `m0`.
    pub mean_const: f64,
}

impl Hyperparams {
    pub fn isotropic(signal_var: f64, length_scale: f64, dim: usize, noise_var: f64, mean_const: f64) -> Self {
        Self {
            signal_var,
            length_scales: vec![length_scale; dim],
            noise_var,
            mean_const,
        }
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_var > 0.0 && self.signal_var.is_finite()) {
            return Err(Error::InvalidInput(format!("signal_var must be > 0, got {}", self.signal_var)));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidInput(format!("noise_var must be > 0, got {}", self.noise_var)));
        }
        if self.length_scales.is_empty() {
            return Err(Error::InvalidInput("length_scales must not be empty".into()));
        }
        if let Some(l) = self.length_scales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput(format!("length scales must be > 0, got {l}")));
        }
        if !self.mean_const.is_finite() {
            return Err(Error::InvalidInput("mean_const must be finite".into()));
        }
        Ok(())
    }

    /// Packs into the search space used by the hyperparameter optimiser:
    /// `[ln sf2, ln lambda_1.., ln sn2, m0]`.
    pub fn to_search_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim() + 3);
        v.push(self.signal_var.ln());
        v.extend(self.length_scales.iter().map(|l| l.ln()));
        v.push(self.noise_var.ln());
        v.push(self.mean_const);
        v
    }

    pub fn from_search_vector(v: &[f64]) -> Self {
        let d = v.len() - 3;
        Self {
            signal_var: v[0].exp(),
            length_scales: v[1..=d].iter().map(|x| x.exp()).collect(),
            noise_var: v[d + 1].exp(),
            mean_const: v[d + 2],
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

#[inline]
fn se_unchecked(a: &[f64], b: &[f64], hyper: &Hyperparams) -> f64 {
    let mut quad = 0.0;
    for ((x, y), l) in a.iter().zip(b).zip(&hyper.length_scales) {
        let r = x - y;
        quad += r * r / (l * l);
    }
    hyper.signal_var * (-0.5 * quad).exp()
}

/// `sf2 * exp(-0.5 (a-b)' W^-1 (a-b))`.
pub fn kernel_se(a: &[f64], b: &[f64], hyper: &Hyperparams) -> Result<f64> {
    check_dim(hyper.dim(), a.len())?;
    check_dim(hyper.dim(), b.len())?;
    Ok(se_unchecked(a, b, hyper))
}

/// Expected squared-exponential kernel between two Gaussian inputs.
///
/// `same_index` selects the Kronecker-delta branch: set it only when both
/// arguments are the same dataset entry or the same query instance.
pub fn kernel_uise(p: &GaussianInput, q: &GaussianInput, same_index: bool, hyper: &Hyperparams) -> Result<f64> {
    check_dim(hyper.dim(), p.dim())?;
    check_dim(hyper.dim(), q.dim())?;
    uise_unchecked(p, q, same_index, hyper)
}

fn uise_unchecked(p: &GaussianInput, q: &GaussianInput, same_index: bool, hyper: &Hyperparams) -> Result<f64> {
    use CovShape::*;
    let a = p.mean.as_slice();
    let b = q.mean.as_slice();
    match (p.shape, q.shape) {
        (Zero, Zero) => Ok(se_unchecked(a, b, hyper)),
        (Zero | Diagonal, Zero | Diagonal) => {
            let mut quad = 0.0;
            let mut det = 1.0;
            for k in 0..a.len() {
                let l2 = hyper.length_scales[k] * hyper.length_scales[k];
                let s = p.cov[(k, k)] + q.cov[(k, k)];
                let r = a[k] - b[k];
                quad += r * r / (l2 + s);
                det *= 1.0 + s / l2;
            }
            let denom = if same_index { 1.0 } else { det.sqrt() };
            Ok(hyper.signal_var * (-0.5 * quad).exp() / denom)
        }
        _ => {
            let d = a.len();
            let mut m = &p.cov + &q.cov;
            for k in 0..d {
                m[(k, k)] += hyper.length_scales[k] * hyper.length_scales[k];
            }
            let chol = m
                .cholesky()
                .ok_or_else(|| Error::Numeric("W + S_i + S_j is not positive-definite".into()))?;
            let r = &p.mean - &q.mean;
            let sol = chol.solve(&r);
            let quad = r.dot(&sol);
            let denom = if same_index {
                1.0
            } else {
                // |I + W^-1 S| = |W + S| / |W|
                let l = chol.l_dirty();
                let mut ratio = 1.0;
                for k in 0..d {
                    let lk = hyper.length_scales[k];
                    let f = l[(k, k)] / lk;
                    ratio *= f * f;
                }
                ratio.sqrt()
            };
            Ok(hyper.signal_var * (-0.5 * quad).exp() / denom)
        }
    }
}

/// Ordered observations `(input distribution, observed value)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    entries: Vec<(GaussianInput, f64)>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, input: GaussianInput, value: f64) -> Result<()> {
        if let Some(d) = self.dim() {
            check_dim(d, input.dim())?;
        }
        if !value.is_finite() {
            return Err(Error::InvalidInput("observation value must be finite".into()));
        }
        self.entries.push((input, value));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|(x, _)| x.dim())
    }

    pub fn entries(&self) -> &[(GaussianInput, f64)] {
        &self.entries
    }

    pub fn inputs(&self) -> impl Iterator<Item = &GaussianInput> {
        self.entries.iter().map(|(x, _)| x)
    }

    pub fn values(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.entries.iter().map(|(_, z)| *z))
    }
}

impl FromIterator<(GaussianInput, f64)> for Dataset {
    fn from_iter<I: IntoIterator<Item = (GaussianInput, f64)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

fn check_dataset(data: &Dataset, hyper: &Hyperparams) -> Result<()> {
    hyper.validate()?;
    for (x, _) in data.entries() {
        check_dim(hyper.dim(), x.dim())?;
    }
    Ok(())
}

/// `[K]_ij = k_p(P_i, P_j, i == j) + delta_ij sn2`, without any jitter.
pub fn gram_matrix(data: &Dataset, hyper: &Hyperparams) -> Result<DMatrix<f64>> {
    check_dataset(data, hyper)?;
    let k = signal_gram(data, hyper)?;
    Ok(k + DMatrix::from_diagonal_element(data.len(), data.len(), hyper.noise_var))
}

fn signal_gram(data: &Dataset, hyper: &Hyperparams) -> Result<DMatrix<f64>> {
    let n = data.len();
    let e = data.entries();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = uise_unchecked(&e[i].0, &e[i].0, true, hyper)?;
        for j in 0..i {
            let v = uise_unchecked(&e[i].0, &e[j].0, false, hyper)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

fn cholesky_with_jitter(k: DMatrix<f64>, signal_var: f64) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = k.clone().cholesky() {
        return Ok((c.unpack(), 0.0));
    }
    for rel in JITTER_SEQUENCE {
        let jitter = rel * signal_var;
        let n = k.nrows();
        let kj = &k + DMatrix::from_diagonal_element(n, n, jitter);
        if let Some(c) = kj.cholesky() {
            return Ok((c.unpack(), jitter));
        }
    }
    Err(Error::IllConditioned {
        jitters: JITTER_SEQUENCE.iter().map(|r| r * signal_var).collect(),
    })
}

/// Fitted GP state. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    dataset: Dataset,
    hyper: Hyperparams,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Fits the posterior. An empty dataset yields a prior-only posterior.
pub fn fit_posterior(data: &Dataset, hyper: &Hyperparams) -> Result<GpPosterior> {
    let k = gram_matrix(data, hyper)?;
    let n = data.len();
    if n == 0 {
        return Ok(GpPosterior {
            dataset: data.clone(),
            hyper: hyper.clone(),
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        });
    }
    let (chol, jitter) = cholesky_with_jitter(k, hyper.signal_var)?;
    let resid = data.values().add_scalar(-hyper.mean_const);
    let alpha = solve_cholesky(&chol, &resid)?;
    Ok(GpPosterior {
        dataset: data.clone(),
        hyper: hyper.clone(),
        chol,
        alpha,
        jitter,
    })
}

fn solve_cholesky(l: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let y = l
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    l.tr_solve_lower_triangular(&y)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))
}

impl GpPosterior {
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// Lower Cholesky factor of the (jittered) Gram matrix.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `K^-1 (z - m0)`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Diagonal jitter that was needed to factorise the Gram matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    fn cross_cov(&self, query: &GaussianInput) -> Result<DVector<f64>> {
        check_dim(self.dim(), query.dim())?;
        let e = self.dataset.entries();
        let mut k = DVector::zeros(e.len());
        for (i, (x, _)) in e.iter().enumerate() {
            k[i] = uise_unchecked(query, x, false, &self.hyper)?;
        }
        Ok(k)
    }

    /// Posterior mean only; skips the triangular solve.
    pub fn predict_mean(&self, query: &GaussianInput) -> Result<f64> {
        let k = self.cross_cov(query)?;
        Ok(self.hyper.mean_const + k.dot(&self.alpha))
    }

    /// Posterior `(mean, variance)` at a deterministic or Gaussian query. The
    /// prior term uses the same-instance rule, so it always equals `sf2`.
    pub fn predict(&self, query: &GaussianInput) -> Result<(f64, f64)> {
        let k = self.cross_cov(query)?;
        let prior = self.hyper.signal_var;
        if k.is_empty() {
            return Ok((self.hyper.mean_const, prior));
        }
        let mean = self.hyper.mean_const + k.dot(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        let var = prior - v.norm_squared();
        if var < -VARIANCE_SLACK * prior.max(1.0) {
            return Err(Error::Numeric(format!("negative posterior variance {var:e}")));
        }
        Ok((mean, var.max(0.0)))
    }

    pub fn predict_at(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.predict(&GaussianInput::deterministic(x))
    }

    /// Log marginal likelihood of the fitted dataset.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.dataset.len();
        if n == 0 {
            return 0.0;
        }
        let resid = self.dataset.values().add_scalar(-self.hyper.mean_const);
        let half_logdet: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * resid.dot(&self.alpha) - half_logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// `-0.5 r' K^-1 r - 0.5 log|K| - n/2 log 2pi` with `r = z - m0`.
pub fn log_marginal_likelihood(data: &Dataset, hyper: &Hyperparams) -> Result<f64> {
    Ok(fit_posterior(data, hyper)?.log_marginal_likelihood())
}

/// Analytic LML gradient with respect to `[ln sf2, ln lambda_1.., ln sn2, m0]`.
///
/// Only defined when every dataset input is deterministic.
pub fn lml_gradient(data: &Dataset, hyper: &Hyperparams) -> Result<Vec<f64>> {
    check_dataset(data, hyper)?;
    if data.inputs().any(|x| !x.is_deterministic()) {
        return Err(Error::InvalidInput(
            "analytic LML gradient requires deterministic inputs".into(),
        ));
    }
    let d = hyper.dim();
    let n = data.len();
    let mut grad = vec![0.0; d + 3];
    if n == 0 {
        return Ok(grad);
    }
    let post = fit_posterior(data, hyper)?;
    let l = post.chol();
    let kinv = {
        let id = DMatrix::identity(n, n);
        let y = l.solve_lower_triangular(&id).ok_or_else(|| Error::Numeric("solve failed".into()))?;
        l.tr_solve_lower_triangular(&y).ok_or_else(|| Error::Numeric("solve failed".into()))?
    };
    let alpha = post.alpha();
    // A = alpha alpha' - K^-1; dL/dtheta = 0.5 tr(A dK/dtheta)
    let a = alpha * alpha.transpose() - kinv;
    let kf = signal_gram(data, hyper)?;
    let xs: Vec<&DVector<f64>> = data.inputs().map(|x| x.mean()).collect();

    grad[0] = 0.5 * a.component_mul(&kf).sum();
    for (dim, l) in hyper.length_scales.iter().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r = xs[i][dim] - xs[j][dim];
                acc += a[(i, j)] * kf[(i, j)] * r * r / (l * l);
            }
        }
        grad[1 + dim] = 0.5 * acc;
    }
    grad[d + 1] = 0.5 * hyper.noise_var * a.trace();
    grad[d + 2] = alpha.sum();
    Ok(grad)
}

/// Box constraints on the hyperparameters in natural units. A coordinate
/// with equal lower and upper bounds is held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub lower: Hyperparams,
    pub upper: Hyperparams,
}

impl HyperBounds {
    /// Positive parameters in `[h / factor, h * factor]`, the mean in
    /// `m0 +- mean_radius`.
    pub fn around(h: &Hyperparams, factor: f64, mean_radius: f64) -> Self {
        let scale = |h: &Hyperparams, f: f64, m: f64| Hyperparams {
            signal_var: h.signal_var * f,
            length_scales: h.length_scales.iter().map(|l| l * f).collect(),
            noise_var: h.noise_var * f,
            mean_const: h.mean_const + m,
        };
        Self {
            lower: scale(h, 1.0 / factor, -mean_radius),
            upper: scale(h, factor, mean_radius),
        }
    }

    pub fn contains(&self, h: &Hyperparams) -> bool {
        let lo = self.lower.to_search_vector();
        let hi = self.upper.to_search_vector();
        let v = h.to_search_vector();
        lo.len() == v.len()
            && v.iter().zip(lo.iter().zip(&hi)).all(|(x, (a, b))| *a - 1e-12 <= *x && *x <= *b + 1e-12)
    }
}

/// Derivative-free bounded compass search on the log marginal likelihood.
///
/// Positive parameters are searched in log space, the mean linearly. Moves
/// are accepted only on strict improvement, so the result never has lower
/// likelihood than `init`. `budget` counts likelihood evaluations including
/// the one at `init`; if that evaluation fails, `init` is returned.
pub fn fit_hyperparameters(data: &Dataset, init: &Hyperparams, bounds: &HyperBounds, budget: usize) -> Hyperparams {
    if budget <= 1 || data.is_empty() {
        return init.clone();
    }
    let lo = bounds.lower.to_search_vector();
    let hi = bounds.upper.to_search_vector();
    let mut best = init.to_search_vector();
    if lo.len() != best.len() || hi.len() != best.len() {
        return init.clone();
    }
    let eval = |v: &[f64]| log_marginal_likelihood(data, &Hyperparams::from_search_vector(v)).ok();
    let Some(mut best_val) = eval(&best) else {
        return init.clone();
    };
    let mut used = 1;
    let mut steps: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .enumerate()
        .map(|(i, (a, b))| {
            let width = b - a;
            if i + 1 == best.len() {
                width / 4.0
            } else {
                (width / 4.0).min(1.0)
            }
        })
        .collect();
    const MIN_STEP: f64 = 1e-4;

    'outer: while steps.iter().any(|s| *s >= MIN_STEP) {
        let mut improved = false;
        for c in 0..best.len() {
            if steps[c] < MIN_STEP {
                continue;
            }
            for dir in [1.0, -1.0] {
                if used >= budget {
                    break 'outer;
                }
                let mut cand = best.clone();
                cand[c] = (cand[c] + dir * steps[c]).clamp(lo[c], hi[c]);
                if cand[c] == best[c] {
                    continue;
                }
                used += 1;
                if let Some(v) = eval(&cand) {
                    if v > best_val {
                        best_val = v;
                        best = cand;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Hyperparams::from_search_vector(&best)
}
