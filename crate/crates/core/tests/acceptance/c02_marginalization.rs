use std::time::Instant;

use hbkmr::kernel::{factor_cov, KernelMatrix};
use hbkmr::model::{log_marginal_likelihood, s_diag};
use hbkmr::{Dataset, ParamState, VarianceDesign};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::common::*;

fn random_design(rng: &mut ChaCha8Rng, n: usize, q: usize) -> VarianceDesign {
    let w = faer::Mat::from_fn(n, q + 1, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    VarianceDesign {
        w,
        recipe: Vec::new(),
        column_names: (0..=q).map(|j| format!("w{j}")).collect(),
        full_rank: true,
    }
}

fn woodbury_error(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(2..=20);
    let m = 3;
    let z = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
    let r: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..3.0)).collect();
    let tau = rng.random_range(0.2..3.0);
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();

    let k = KernelMatrix::new(to_faer(&z).as_ref(), &r).unwrap();
    let f = factor_cov(&k, tau, &s).unwrap();
    let s_mat = faer::Mat::from_fn(n, n, |i, j| if i == j { s[i] } else { 0.0 });
    let v_inv_s = f.solve_mat(s_mat.as_ref());
    let lhs = DMatrix::from_fn(n, n, |i, j| s_mat[(i, j)] - s[i] * v_inv_s[(i, j)]);

    let tk = gram(&z, &z, &r) * tau;
    let s_inv = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / s[i] } else { 0.0 });
    let rhs = (s_inv + tk.try_inverse().unwrap()).try_inverse().unwrap();
    (lhs - rhs).abs().max()
}

/// Monte Carlo estimate of `∫ N(y; Xβ + h, S) N(h; 0, τK) dh` with its standard error.
fn mc_marginal(rng: &mut ChaCha8Rng, y: &[f64], xb: &[f64], s: &[f64], tk: &DMatrix<f64>, draws: usize) -> (f64, f64) {
    let n = y.len();
    let l = tk.clone().cholesky().unwrap().l();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let h = &l * xi;
        let log_w: f64 = (0..n)
            .map(|i| {
                let e = y[i] - xb[i] - h[i];
                -0.5 * ((2.0 * std::f64::consts::PI * s[i]).ln() + e * e / s[i])
            })
            .sum();
        let w = log_w.exp();
        sum += w;
        sum_sq += w * w;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean) * draws as f64 / (draws - 1) as f64;
    (mean, (var / draws as f64).sqrt())
}

#[test]
fn criterion_02_marginalization_oracle() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let worst = (0..50).map(|_| woodbury_error(&mut rng)).fold(0.0f64, f64::max);

    let mut mc_ok = 0;
    let mut worst_z = 0.0f64;
    let instances = 6;
    for n in 2..2 + instances {
        let m = rng.random_range(1..=3);
        let p = rng.random_range(0..=2);
        let q = rng.random_range(0..=2);
        let z = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let w = random_design(&mut rng, n, q);
        let state = ParamState {
            beta: (0..p).map(|_| rng.random_range(-1.0..1.0)).collect(),
            gamma: (0..=q).map(|_| rng.random_range(-0.5..0.5)).collect(),
            sqrt_tau: rng.random_range(0.4..1.2),
            r: (0..m).map(|_| rng.random_range(0.2..2.0)).collect(),
        };
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let d = Dataset::new(
            y.clone(),
            to_faer(&x),
            to_faer(&z),
            (0..p).map(|j| format!("x{j}")).collect(),
            (0..m).map(|j| format!("z{j}")).collect(),
        )
        .unwrap();
        let closed = log_marginal_likelihood(&state, &d, &w).unwrap().exp();
        let s = s_diag(&w, &state.gamma).unwrap();
        let xb: Vec<f64> = (0..n).map(|i| (0..p).map(|j| x[(i, j)] * state.beta[j]).sum()).collect();
        let tk = gram(&z, &z, &state.r) * state.tau() + DMatrix::identity(n, n) * 1e-12;
        let (est, se) = mc_marginal(&mut rng, &y, &xb, &s, &tk, 400_000);
        let zscore = (est - closed).abs() / se;
        worst_z = worst_z.max(zscore);
        if zscore < 3.0 {
            mc_ok += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-8 && mc_ok == instances;
    let ok = report(
        2,
        pass,
        &format!(
            "Woodbury max-abs error {worst:.2e} over 50 instances (tol 1e-8); MC marginalization within 3 SE in {mc_ok}/{instances} (N = 2..7, worst {worst_z:.2} SE)"
        ),
        secs,
        120.0,
    );
    assert!(ok);
}
