use std::time::Instant;

use hbkmr::inference::{joint_effects, DEFAULT_STRIDE};

use crate::common::*;

#[test]
fn criterion_10_prior_sensitivity() {
    let _guard = serial();
    let base_fits = &hbkmr_het().value;
    let refits = hbkmr_uniform_r();
    let start = Instant::now();
    let targets = joint_targets();
    let (mut strong, mut flipped) = (0, 0);
    for (i, rep) in het()[..SENSITIVITY_REPS].iter().enumerate() {
        let a = joint_effects(&base_fits[i], &rep.train, &rep.design, 0.25, &targets, DEFAULT_STRIDE).unwrap();
        let b = joint_effects(&refits.value[i], &rep.train, &rep.design, 0.25, &targets, DEFAULT_STRIDE).unwrap();
        for (ea, eb) in a.iter().zip(&b) {
            if ea.estimate.abs() > 2.0 * ea.sd {
                strong += 1;
                if ea.estimate.signum() != eb.estimate.signum() {
                    flipped += 1;
                }
            }
        }
    }
    let secs = refits.secs + start.elapsed().as_secs_f64();
    let pass = strong > 0 && flipped == 0;
    let ok = report(
        10,
        pass,
        &format!(
            "r ~ Uniform(0, 5) refit on {SENSITIVITY_REPS} replicates: {flipped} sign changes among {strong} strongly identified joint effects (need 0)"
        ),
        secs,
        1200.0,
    );
    assert!(ok);
}
