//! GP posterior, likelihood and kernel checks against independent
//! dense-algebra and Monte-Carlo computations.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use uibo::gp::{
    fit_hyperparameters, fit_posterior, gram_matrix, kernel_se, kernel_uise, lml_gradient, log_marginal_likelihood,
    Dataset, GaussianInput, HyperBounds, Hyperparams,
};

fn se(a: &[f64], b: &[f64], h: &Hyperparams) -> f64 {
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
        signal_var: rng.random_range(0.3..2.5),
        length_scales: (0..d).map(|_| rng.random_range(0.4..2.0)).collect(),
        noise_var: rng.random_range(0.005..0.2),
        mean_const: rng.random_range(-1.0..1.0),
    }
}

fn random_cov(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0) * scale);
    &a * a.transpose()
}

fn random_input(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> GaussianInput {
    let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    GaussianInput::new(mean, random_cov(rng, d, scale)).unwrap()
}

fn sample(rng: &mut ChaCha8Rng, p: &GaussianInput) -> Vec<f64> {
    let l = p
        .cov()
        .clone()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::zeros(p.dim(), p.dim()));
    let z = DVector::from_fn(p.dim(), |_, _| StandardNormal.sample(rng));
    (p.mean() + l * z).iter().copied().collect()
}

/// Dense K^-1 products for mean and variance at a query.
fn dense_predict(data: &[(GaussianInput, f64)], h: &Hyperparams, q: &GaussianInput) -> (f64, f64) {
    let n = data.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel_uise(&data[i].0, &data[j].0, i == j, h).unwrap() + if i == j { h.noise_var } else { 0.0 }
    });
    let kinv = k.try_inverse().expect("invertible");
    let ks = DVector::from_fn(n, |i, _| kernel_uise(&data[i].0, q, false, h).unwrap());
    let r = DVector::from_fn(n, |i, _| data[i].1 - h.mean_const);
    let mean = h.mean_const + (ks.transpose() * &kinv * r)[(0, 0)];
    let var = h.signal_var - (ks.transpose() * &kinv * &ks)[(0, 0)];
    (mean, var)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn expected_kernel_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let samples = 200_000;
    for _ in 0..8 {
        let h = random_hyper(&mut rng, 2);
        let p = random_input(&mut rng, 2, 0.6);
        let q = random_input(&mut rng, 2, 0.6);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let v = se(&sample(&mut rng, &p), &sample(&mut rng, &q), &h);
            s += v;
            s2 += v * v;
        }
        let m = s / samples as f64;
        let se_mc = ((s2 / samples as f64 - m * m) / samples as f64).sqrt();
        let k = kernel_uise(&p, &q, false, &h).unwrap();
        assert!((k - m).abs() <= 4.0 * se_mc + 1e-12, "kernel {k} vs MC {m} ± {se_mc}");
    }
}

#[test]
fn posterior_matches_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..30 {
        let d = rng.random_range(1..=3);
        let h = random_hyper(&mut rng, d);
        let n = rng.random_range(1..=15);
        let data: Vec<(GaussianInput, f64)> = (0..n)
            .map(|_| (random_input(&mut rng, d, 0.3), rng.random_range(-2.0..2.0)))
            .collect();
        let post = fit_posterior(&data.iter().cloned().collect(), &h).unwrap();
        for _ in 0..5 {
            let q = random_input(&mut rng, d, 0.3);
            let (m, v) = post.predict(&q).unwrap();
            let (mr, vr) = dense_predict(&data, &h, &q);
            assert!(rel(m, mr) < 1e-8, "mean {m} vs {mr}");
            assert!(rel(v, vr) < 1e-8, "var {v} vs {vr}");
        }
    }
}

#[test]
fn alpha_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let h = random_hyper(&mut rng, 2);
    let data: Dataset = (0..5)
        .map(|_| (random_input(&mut rng, 2, 0.2), rng.random_range(-1.0..1.0)))
        .collect();
    let post = fit_posterior(&data, &h).unwrap();
    let k = gram_matrix(&data, &h).unwrap();
    let r = data.values().add_scalar(-h.mean_const);
    let want = k.lu().solve(&r).unwrap();
    for (a, b) in post.alpha().iter().zip(want.iter()) {
        assert!(rel(*a, *b) < 1e-8);
    }
}

#[test]
fn uncertain_query_mean_matches_propagated_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let h = Hyperparams::isotropic(1.0, 1.0, 2, 0.01, 0.3);
    let data: Dataset = (0..5)
        .map(|_| {
            let x = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            (GaussianInput::deterministic(&x), rng.random_range(-1.0..1.0))
        })
        .collect();
    let post = fit_posterior(&data, &h).unwrap();
    let q = GaussianInput::new(DVector::from_vec(vec![0.2, -0.1]), DMatrix::from_diagonal_element(2, 2, 0.01)).unwrap();
    let want = post.predict_mean(&q).unwrap();
    let n = 200_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = post.predict_mean(&GaussianInput::deterministic(&sample(&mut rng, &q))).unwrap();
        s += v;
        s2 += v * v;
    }
    let m = s / n as f64;
    let sem = ((s2 / n as f64 - m * m) / n as f64).sqrt();
    assert!((want - m).abs() <= 3.0 * sem, "{want} vs {m} ± {sem}");
}

fn dense_lml(data: &Dataset, h: &Hyperparams) -> f64 {
    let k = gram_matrix(data, h).unwrap();
    let n = data.len() as f64;
    let r = data.values().add_scalar(-h.mean_const);
    let lu = k.clone().lu();
    let det = lu.determinant();
    let quad = (r.transpose() * lu.solve(&r).unwrap())[(0, 0)];
    -0.5 * quad - 0.5 * det.ln() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

#[test]
fn lml_matches_dense_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..30 {
        let h = random_hyper(&mut rng, 2);
        let n = rng.random_range(1..=15);
        let data: Dataset = (0..n)
            .map(|_| (random_input(&mut rng, 2, 0.3), rng.random_range(-2.0..2.0)))
            .collect();
        let lml = log_marginal_likelihood(&data, &h).unwrap();
        let want = dense_lml(&data, &h);
        assert!((lml - want).abs() / want.abs().max(1.0) < 1e-8, "{lml} vs {want}");
    }
}

fn lml_at(data: &Dataset, v: &[f64]) -> f64 {
    log_marginal_likelihood(data, &Hyperparams::from_search_vector(v)).unwrap()
}

fn central_diff(data: &Dataset, v: &[f64], k: usize, step: f64) -> f64 {
    let mut a = v.to_vec();
    let mut b = v.to_vec();
    a[k] += step;
    b[k] -= step;
    (lml_at(data, &a) - lml_at(data, &b)) / (2.0 * step)
}

#[test]
fn lml_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for _ in 0..20 {
        let h = random_hyper(&mut rng, 2);
        let n = rng.random_range(3..=12);
        let data: Dataset = (0..n)
            .map(|_| {
                let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                (GaussianInput::deterministic(&x), rng.random_range(-2.0..2.0))
            })
            .collect();
        let g = lml_gradient(&data, &h).unwrap();
        let v = h.to_search_vector();
        for (k, gk) in g.iter().enumerate() {
            let fd = central_diff(&data, &v, k, 1e-5);
            assert!((gk - fd).abs() <= 1e-5 * gk.abs().max(1.0), "coord {k}: {gk} vs {fd}");
        }
    }
}

#[test]
fn uncertain_lml_finite_differences_are_self_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..10 {
        let h = random_hyper(&mut rng, 2);
        let data: Dataset = (0..8)
            .map(|_| (random_input(&mut rng, 2, 0.3), rng.random_range(-2.0..2.0)))
            .collect();
        let v = h.to_search_vector();
        for k in 0..v.len() {
            let coarse = central_diff(&data, &v, k, 2e-3);
            let fine = central_diff(&data, &v, k, 1e-3);
            let richardson = (4.0 * fine - coarse) / 3.0;
            assert!((richardson - fine).abs() <= 1e-5 * richardson.abs().max(1.0), "coord {k}");
        }
    }
}

#[test]
fn length_scale_fit_lands_near_grid_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let truth = Hyperparams::isotropic(1.0, 1.0, 1, 0.01, 0.0);
    let xs: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..10.0)).collect();
    let k = DMatrix::from_fn(30, 30, |i, j| se(&[xs[i]], &[xs[j]], &truth) + if i == j { 0.01 } else { 0.0 });
    let l = k.cholesky().unwrap().l();
    let z = l * DVector::from_fn(30, |_, _| StandardNormal.sample(&mut rng));
    let data: Dataset = xs
        .iter()
        .zip(z.iter())
        .map(|(x, y)| (GaussianInput::deterministic(&[*x]), *y))
        .collect();

    let grid: Vec<f64> = (1..=50).map(|i| 0.1 * i as f64).collect();
    let best = grid
        .iter()
        .copied()
        .max_by(|a, b| {
            let la = log_marginal_likelihood(&data, &Hyperparams { length_scales: vec![*a], ..truth.clone() }).unwrap();
            let lb = log_marginal_likelihood(&data, &Hyperparams { length_scales: vec![*b], ..truth.clone() }).unwrap();
            la.total_cmp(&lb)
        })
        .unwrap();

    let init = Hyperparams { length_scales: vec![3.0], ..truth.clone() };
    let bounds = HyperBounds {
        lower: Hyperparams { length_scales: vec![0.05], ..truth.clone() },
        upper: Hyperparams { length_scales: vec![10.0], ..truth.clone() },
    };
    let fit = fit_hyperparameters(&data, &init, &bounds, 200);
    let lam = fit.length_scales[0];
    assert_eq!(fit.signal_var, truth.signal_var);
    assert!((lam - best).abs() <= 0.1 + 1e-9, "fit {lam} vs grid {best}");
    assert!((0.5..=2.0).contains(&lam), "{lam}");
}

#[test]
fn fit_never_worsens_from_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let truth = Hyperparams::isotropic(1.0, 0.8, 2, 0.02, 0.5);
    let data: Dataset = (0..20)
        .map(|_| {
            let x = [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)];
            (GaussianInput::isotropic(&x, 0.01).unwrap(), rng.random_range(0.0..1.0))
        })
        .collect();
    let bounds = HyperBounds::around(&truth, 10.0, 2.0);
    let fit = fit_hyperparameters(&data, &truth, &bounds, 60);
    assert!(log_marginal_likelihood(&data, &fit).unwrap() >= log_marginal_likelihood(&data, &truth).unwrap());
    assert!(bounds.contains(&fit));
}

fn arb_hyper(d: usize) -> impl Strategy<Value = Hyperparams> {
    (0.1..3.0f64, prop::collection::vec(0.2..3.0f64, d), 1e-4..0.5f64, -2.0..2.0f64).prop_map(|(s, l, n, m)| Hyperparams {
        signal_var: s,
        length_scales: l,
        noise_var: n,
        mean_const: m,
    })
}

fn arb_input(d: usize) -> impl Strategy<Value = GaussianInput> {
    (prop::collection::vec(-3.0..3.0f64, d), prop::collection::vec(-0.8..0.8f64, d * d)).prop_map(move |(m, a)| {
        let a = DMatrix::from_row_slice(d, d, &a);
        GaussianInput::new(DVector::from_vec(m), &a * a.transpose()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn zero_covariance_reduces_to_se(h in arb_hyper(2), a in prop::collection::vec(-3.0..3.0f64, 2), b in prop::collection::vec(-3.0..3.0f64, 2)) {
        let k = kernel_uise(&GaussianInput::deterministic(&a), &GaussianInput::deterministic(&b), false, &h).unwrap();
        prop_assert!((k - kernel_se(&a, &b, &h).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn kernel_is_symmetric(h in arb_hyper(2), p in arb_input(2), q in arb_input(2), same in any::<bool>()) {
        let a = kernel_uise(&p, &q, same, &h).unwrap();
        let b = kernel_uise(&q, &p, same, &h).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn same_instance_is_signal_var(h in arb_hyper(2), p in arb_input(2)) {
        prop_assert_eq!(kernel_uise(&p, &p, true, &h).unwrap(), h.signal_var);
    }

    #[test]
    fn larger_covariance_never_increases_kernel_at_shared_mean(
        h in arb_hyper(2),
        m1 in prop::collection::vec(-2.0..2.0f64, 2),
        v in prop::collection::vec(0.0..1.0f64, 2),
        extra in prop::collection::vec(0.0..1.0f64, 2),
    ) {
        let small = GaussianInput::new(DVector::from_vec(m1.clone()), DMatrix::from_diagonal(&DVector::from_vec(v.clone()))).unwrap();
        let big_var: Vec<f64> = v.iter().zip(&extra).map(|(a, b)| a + b).collect();
        let other = GaussianInput::deterministic(&m1);
        let big = GaussianInput::new(DVector::from_vec(m1), DMatrix::from_diagonal(&DVector::from_vec(big_var))).unwrap();
        let ks = kernel_uise(&small, &other, false, &h).unwrap();
        let kb = kernel_uise(&big, &other, false, &h).unwrap();
        prop_assert!(kb <= ks + 1e-15);
    }

    #[test]
    fn gram_is_psd(h in arb_hyper(2), inputs in prop::collection::vec(arb_input(2), 1..20)) {
        let data: Dataset = inputs.into_iter().map(|p| (p, 0.0)).collect();
        let h0 = Hyperparams { noise_var: 1e-12, ..h };
        let k = gram_matrix(&data, &h0).unwrap();
        let min = k.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-8, "min eigenvalue {}", min);
    }

    #[test]
    fn extra_observation_never_increases_variance(
        h in arb_hyper(2),
        inputs in prop::collection::vec(arb_input(2), 1..10),
        extra in arb_input(2),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data: Dataset = inputs.into_iter().map(|p| (p, 0.0)).collect();
        let before = fit_posterior(&data, &h).unwrap();
        data.push(extra, 1.0).unwrap();
        let after = fit_posterior(&data, &h).unwrap();
        for _ in 0..100 {
            let q = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let (_, v0) = before.predict_at(&q).unwrap();
            let (_, v1) = after.predict_at(&q).unwrap();
            prop_assert!(v1 <= v0 + 1e-8, "{} > {}", v1, v0);
        }
    }
}

#[test]
fn observed_point_has_no_variance_without_noise() {
    let h = Hyperparams::isotropic(1.3, 0.9, 2, 1e-12, 0.0);
    let data: Dataset = [[0.0, 0.0], [1.0, 0.5], [-0.7, 1.2]]
        .iter()
        .map(|x| (GaussianInput::deterministic(x), x[0] - x[1]))
        .collect();
    let post = fit_posterior(&data, &h).unwrap();
    for (x, z) in [([0.0, 0.0], 0.0), ([1.0, 0.5], 0.5)] {
        let (m, v) = post.predict_at(&x).unwrap();
        assert!(v <= 1e-8);
        assert!((m - z).abs() < 1e-8);
    }
}
