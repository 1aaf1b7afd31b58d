use std::time::Instant;

use hbkmr::diagnostics::{bayesian_residuals, linear_approx_residuals};

use crate::common::*;

#[test]
fn criterion_07_diagnostics_detection() {
    let _guard = serial();
    let (het_fits, homo_fits) = (&bkmr_het().value, &bkmr_homo().value);
    let start = Instant::now();
    let driver = [DRIVER.to_string()];

    let mut detected = 0;
    let mut both_flag = 0;
    for (samples, rep) in het_fits.iter().zip(het()) {
        let bayes = bayesian_residuals(samples, &rep.train, &rep.homo_design, None).unwrap();
        let linear = linear_approx_residuals(&rep.train, None).unwrap();
        let rho = bayes.association(DRIVER).and_then(|a| a.spearman).unwrap();
        if rho > 0.2 {
            detected += 1;
        }
        if bayes.flagged().contains(&DRIVER) && linear.flagged().contains(&DRIVER) {
            both_flag += 1;
        }
    }
    let mut quiet = 0;
    for (samples, rep) in homo_fits.iter().zip(homo()) {
        let bayes = bayesian_residuals(samples, &rep.train, &rep.homo_design, Some(&driver)).unwrap();
        let rho = bayes.association(DRIVER).and_then(|a| a.spearman).unwrap();
        if rho.abs() < 0.15 {
            quiet += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = detected >= 18 && quiet >= 18 && both_flag >= 16;
    let ok = report(
        7,
        pass,
        &format!(
            "fan-shaped data ρ(|e|, {DRIVER}) > 0.2 in {detected}/{REPS} (need ≥ 18); null |ρ| < 0.15 in {quiet}/{REPS} (need ≥ 18); both residual methods flag {DRIVER} in {both_flag}/{REPS} (need ≥ 16)"
        ),
        secs,
        600.0,
    );
    assert!(ok);
}
