//! Fast built-in invariant suite behind `uibo selftest`.
//!
//! Each check compares library output against a small independent
//! computation. `SelftestHooks::kernel_scale` multiplies every library
//! kernel value before comparison so the harness itself can be exercised.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::wrmse;
use crate::gp::{fit_posterior, kernel_uise, Dataset, GaussianInput, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestHooks {
    pub kernel_scale: f64,
}

impl Default for SelftestHooks {
    fn default() -> Self {
        Self { kernel_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn se_oracle(a: &[f64], b: &[f64], h: &Hyperparams) -> f64 {
    let q: f64 = a
        .iter()
        .zip(b)
        .zip(&h.length_scales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    h.signal_var * (-0.5 * q).exp()
}

fn random_hyper(rng: &mut ChaCha8Rng, d: usize) -> Hyperparams {
    Hyperparams {
        signal_var: rng.random_range(0.2..3.0),
        length_scales: (0..d).map(|_| rng.random_range(0.3..2.0)).collect(),
        noise_var: rng.random_range(1e-3..0.2),
        mean_const: rng.random_range(-1.0..1.0),
    }
}

fn point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

fn kernel_reduction(hooks: &SelftestHooks) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let d = rng.random_range(1..=3);
        let h = random_hyper(&mut rng, d);
        let a = point(&mut rng, d, 3.0);
        let b = point(&mut rng, d, 3.0);
        let lib = kernel_uise(&GaussianInput::deterministic(&a), &GaussianInput::deterministic(&b), false, &h)
            .map(|k| k * hooks.kernel_scale)
            .unwrap_or(f64::NAN);
        let err = (lib - se_oracle(&a, &b, &h)).abs();
        worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
    }
    CheckResult {
        name: "kernel_reduction",
        passed: worst <= 1e-12,
        detail: format!("max abs error {worst:.3e} over 2000 pairs"),
    }
}

fn same_instance_variance(hooks: &SelftestHooks) -> CheckResult {
    let h = Hyperparams::isotropic(1.5, 0.7, 2, 0.01, 0.0);
    let p = GaussianInput::isotropic(&[0.3, -1.0], 0.4).expect("valid input");
    let k = kernel_uise(&p, &p, true, &h).map(|k| k * hooks.kernel_scale).unwrap_or(f64::NAN);
    CheckResult {
        name: "same_instance_variance",
        passed: k == 1.5,
        detail: format!("k(p, p) = {k}"),
    }
}

fn expected_kernel_closed_form(hooks: &SelftestHooks) -> CheckResult {
    // 1-D, both inputs N(0, 1/2), unit length-scale: 1 / sqrt(1 + 1).
    let h = Hyperparams::isotropic(1.0, 1.0, 1, 0.0, 0.0);
    let p = GaussianInput::isotropic(&[0.0], 0.5).expect("valid input");
    let k = kernel_uise(&p, &p, false, &h).map(|k| k * hooks.kernel_scale).unwrap_or(f64::NAN);
    let want = std::f64::consts::FRAC_1_SQRT_2;
    CheckResult {
        name: "expected_kernel_closed_form",
        passed: (k - want).abs() <= 1e-12,
        detail: format!("got {k}, want {want}"),
    }
}

fn posterior_oracle(hooks: &SelftestHooks) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = 2;
        let h = random_hyper(&mut rng, d);
        let n = rng.random_range(1..=12);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| point(&mut rng, d, 2.0)).collect();
        let zs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data: Dataset = xs
            .iter()
            .zip(&zs)
            .map(|(x, z)| (GaussianInput::deterministic(x), *z))
            .collect();
        let k = DMatrix::from_fn(n, n, |i, j| se_oracle(&xs[i], &xs[j], &h) + if i == j { h.noise_var } else { 0.0 });
        let kinv = match k.try_inverse() {
            Some(m) => m,
            None => continue,
        };
        let z = DVector::from_vec(zs.iter().map(|z| z - h.mean_const).collect());
        let post = match fit_posterior(&data, &h) {
            Ok(p) => p,
            Err(_) => {
                worst = f64::INFINITY;
                break;
            }
        };
        let q = point(&mut rng, d, 2.5);
        let ks = DVector::from_fn(n, |i, _| se_oracle(&xs[i], &q, &h));
        let m_ref = h.mean_const + (ks.transpose() * &kinv * &z)[(0, 0)];
        let v_ref = h.signal_var - (ks.transpose() * &kinv * &ks)[(0, 0)];
        let (m, v) = post.predict_at(&q).unwrap_or((f64::NAN, f64::NAN));
        let (m, v) = (m * hooks.kernel_scale, v * hooks.kernel_scale);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        let err = rel(m, m_ref).max(rel(v, v_ref));
        worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
    }
    CheckResult {
        name: "posterior_oracle",
        passed: worst <= 1e-8,
        detail: format!("max relative error {worst:.3e} over 20 datasets"),
    }
}

fn wrmse_hand_case() -> CheckResult {
    let v = wrmse(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap_or(f64::NAN);
    CheckResult {
        name: "wrmse_hand_case",
        passed: (v - 0.577350269).abs() <= 1e-9,
        detail: format!("got {v}"),
    }
}

pub fn run_selftest(hooks: &SelftestHooks) -> Vec<CheckResult> {
    vec![
        kernel_reduction(hooks),
        same_instance_variance(hooks),
        expected_kernel_closed_form(hooks),
        posterior_oracle(hooks),
        wrmse_hand_case(),
    ]
}
