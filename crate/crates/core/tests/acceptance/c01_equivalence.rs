use std::time::Instant;

use hbkmr::model::log_marginal_likelihood;
use hbkmr::{Dataset, ParamState, VarianceDesign};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::*;

/// Homoscedastic BKMR marginal likelihood `N(y; Xβ, τK + σ²I)` written from scratch.
fn bkmr_log_likelihood(y: &[f64], x: &DMatrix<f64>, z: &DMatrix<f64>, beta: &[f64], tau: f64, sigma2: f64, r: &[f64]) -> f64 {
    let n = y.len();
    let k = gram(z, z, r);
    let cov = k * tau + DMatrix::identity(n, n) * sigma2;
    let mean: Vec<f64> = (0..n).map(|i| (0..beta.len()).map(|j| x[(i, j)] * beta[j]).sum()).collect();
    mvn_log_density(y, &mean, &cov)
}

#[test]
fn criterion_01_q0_equivalence() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=30);
        let m = rng.random_range(1..=4);
        let p = rng.random_range(0..=3);
        let z = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.5..1.5));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..3.0)).collect();
        let tau: f64 = rng.random_range(0.05..4.0);
        let sigma2: f64 = rng.random_range(0.05..3.0);

        let d = Dataset::new(
            y.clone(),
            to_faer(&x),
            to_faer(&z),
            (0..p).map(|j| format!("x{j}")).collect(),
            (0..m).map(|j| format!("z{j}")).collect(),
        )
        .unwrap();
        let w = VarianceDesign::intercept_only(n);
        let state = ParamState { beta: beta.clone(), gamma: vec![sigma2.ln()], sqrt_tau: tau.sqrt(), r: r.clone() };
        let ours = log_marginal_likelihood(&state, &d, &w).unwrap();
        let reference = bkmr_log_likelihood(&y, &x, &z, &beta, tau, sigma2, &r);
        worst = worst.max((ours - reference).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = report(1, worst < 1e-10, &format!("100 instances, max |Δ log-lik| = {worst:.2e} (tol 1e-10)"), secs, 10.0);
    assert!(ok);
}
