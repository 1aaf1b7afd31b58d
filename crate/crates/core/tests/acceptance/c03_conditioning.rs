use std::time::Instant;

use hbkmr::inference::{h_conditional_draw, predict_draw};
use hbkmr::model::{s_diag, s_diag_rows};
use hbkmr::{Dataset, ParamState, VarianceDesign};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::*;

/// Conditional of the last `k` coordinates of `MVN(0, joint)` given the first
/// `n` equal `e`, read off the blocks of the joint precision.
fn condition_by_precision(joint: &DMatrix<f64>, n: usize, e: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let total = joint.nrows();
    let k = total - n;
    let prec = joint.clone().try_inverse().unwrap();
    let p_nn = prec.view((n, n), (k, k)).into_owned();
    let p_ny = prec.view((n, 0), (k, n)).into_owned();
    let cov = p_nn.try_inverse().unwrap();
    let mean = -(&cov * p_ny * e);
    (mean, cov)
}

#[test]
fn criterion_03_conditioning_oracle() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(3..=25);
        let k = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let p = rng.random_range(0..=2);
        let q = rng.random_range(0..=2);
        let z = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
        let z_new = DMatrix::from_fn(k, m, |_, _| rng.random_range(-2.0..2.0));
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let x_new = DMatrix::from_fn(k, p, |_, _| rng.random_range(-1.0..1.0));
        let w = faer::Mat::from_fn(n, q + 1, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let w_new = faer::Mat::from_fn(k, q + 1, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let design = VarianceDesign { w, recipe: Vec::new(), column_names: (0..=q).map(|j| format!("w{j}")).collect(), full_rank: true };
        let state = ParamState {
            beta: (0..p).map(|_| rng.random_range(-1.0..1.0)).collect(),
            gamma: (0..=q).map(|_| rng.random_range(-1.0..0.5)).collect(),
            sqrt_tau: rng.random_range(0.5..2.0),
            r: (0..m).map(|_| rng.random_range(0.3..2.0)).collect(),
        };
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d = Dataset::new(
            y.clone(),
            to_faer(&x),
            to_faer(&z),
            (0..p).map(|j| format!("x{j}")).collect(),
            (0..m).map(|j| format!("z{j}")).collect(),
        )
        .unwrap();

        let tau = state.tau();
        let s = s_diag(&design, &state.gamma).unwrap();
        let s_new = s_diag_rows(w_new.as_ref(), &state.gamma).unwrap();
        let all_z = DMatrix::from_fn(n + k, m, |i, j| if i < n { z[(i, j)] } else { z_new[(i - n, j)] });
        let mut joint = gram(&all_z, &all_z, &state.r) * tau;
        for i in 0..n {
            joint[(i, i)] += s[i];
        }
        let xb = DVector::from_fn(n, |i, _| (0..p).map(|j| x[(i, j)] * state.beta[j]).sum());
        let e = DVector::from_column_slice(&y) - xb;
        let (h_mean, h_cov) = condition_by_precision(&joint, n, &e);

        let got = h_conditional_draw(&d, &design, &state, to_faer(&z_new).as_ref()).unwrap();
        for i in 0..k {
            worst = worst.max((got.mean[i] - h_mean[i]).abs());
            for j in 0..k {
                worst = worst.max((got.cov[(i, j)] - h_cov[(i, j)]).abs());
            }
        }

        let mut joint_y = joint.clone();
        for i in 0..k {
            joint_y[(n + i, n + i)] += s_new[i];
        }
        let (y_mean, y_cov) = condition_by_precision(&joint_y, n, &e);
        let got = predict_draw(&d, &design, &state, to_faer(&x_new).as_ref(), to_faer(&z_new).as_ref(), w_new.as_ref()).unwrap();
        for i in 0..k {
            let xb_new: f64 = (0..p).map(|j| x_new[(i, j)] * state.beta[j]).sum();
            worst = worst.max((got.mean[i] - (y_mean[i] + xb_new)).abs());
            for j in 0..k {
                worst = worst.max((got.cov[(i, j)] - y_cov[(i, j)]).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = report(3, worst < 1e-8, &format!("50 instances, max-abs error {worst:.2e} (tol 1e-8)"), secs, 60.0);
    assert!(ok);
}
