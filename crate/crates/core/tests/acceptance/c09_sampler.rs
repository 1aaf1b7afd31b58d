use std::time::Instant;

use hbkmr::model::s_diag;
use hbkmr::sampler::{ess, fit_from, Freeze};
use hbkmr::{Dataset, McmcConfig, ParamState, PriorSpec, VarianceDesign};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::common::*;

fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Largest KS statistic over the coordinates of frozen-conditional β draws,
/// with the α = 0.01 critical value.
fn beta_ks() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (n, m, p) = (40, 2, 3);
    let z = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - 0.5 * x[(i, 2)] + rng.random_range(-1.0..1.0)).collect();
    let d = Dataset::new(y.clone(), to_faer(&x), to_faer(&z), vec!["a".into(), "b".into(), "c".into()], vec!["z1".into(), "z2".into()])
        .unwrap();
    let w = VarianceDesign {
        w: faer::Mat::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[(i, 1)] }),
        recipe: Vec::new(),
        column_names: vec!["(intercept)".into(), "b".into()],
        full_rank: true,
    };
    let init = ParamState { beta: vec![0.0; p], gamma: vec![-0.5, 0.7], sqrt_tau: 0.8, r: vec![0.6, 1.2] };
    let prior = PriorSpec::default();
    let draws = 5_000;
    let config = McmcConfig {
        n_burn: 0,
        n_keep: draws,
        seed: 9,
        freeze: Freeze { beta: false, gamma: true, sqrt_tau: true, r: true },
        ..McmcConfig::default()
    };
    let samples = fit_from(&d, &w, &prior, &config, init.clone()).unwrap();

    // exact conditional of β given everything else
    let s = s_diag(&w, &init.gamma).unwrap();
    let mut v = gram(&z, &z, &init.r) * init.tau();
    for i in 0..n {
        v[(i, i)] += s[i];
    }
    let v_inv = v.try_inverse().unwrap();
    let prec = x.transpose() * &v_inv * &x + DMatrix::identity(p, p) / (prior.beta_sd * prior.beta_sd);
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * x.transpose() * &v_inv * DVector::from_column_slice(&y);

    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let worst = (0..p)
        .map(|j| {
            let sd = cov[(j, j)].sqrt();
            let u = samples.column(j).iter().map(|b| std_normal.cdf((b - mean[j]) / sd)).collect();
            ks_uniform(u)
        })
        .fold(0.0, f64::max);
    (worst, 1.628 / (draws as f64).sqrt())
}

fn ar1_ess_error(rho: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x: f64 = StandardNormal.sample(&mut rng);
    let chain: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + innovation * e;
            x
        })
        .collect();
    let theory = n as f64 * (1.0 - rho) / (1.0 + rho);
    (ess(&chain).unwrap().value - theory).abs() / theory
}

#[test]
fn criterion_09_sampler_correctness() {
    let _guard = serial();
    let start = Instant::now();
    let (ks, critical) = beta_ks();
    let e5 = ar1_ess_error(0.5, 100_000, 51);
    let e9 = ar1_ess_error(0.9, 100_000, 52);
    let secs = start.elapsed().as_secs_f64();
    let pass = ks < critical && e5 < 0.3 && e9 < 0.3;
    let ok = report(
        9,
        pass,
        &format!(
            "β Gibbs KS max D = {ks:.4} vs critical {critical:.4} (α = 0.01); AR(1) ESS relative error {:.1}% at ρ=0.5, {:.1}% at ρ=0.9 (need < 30%)",
            100.0 * e5,
            100.0 * e9
        ),
        secs,
        300.0,
    );
    assert!(ok);
}
