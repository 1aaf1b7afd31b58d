use crate::common::*;

#[test]
fn criterion_04_parameter_recovery() {
    let _guard = serial();
    let fits = hbkmr_het();
    let name = format!("gamma[{DRIVER}]");
    let mut covered = 0;
    let mut errors = Vec::new();
    let mut rates = Vec::new();
    for (samples, rep) in fits.value.iter().zip(het()) {
        let g = samples.column_by_name(&name).unwrap();
        let truth = rep.truth.gamma[1];
        if quantile(&g, 0.025) <= truth && truth <= quantile(&g, 0.975) {
            covered += 1;
        }
        errors.push(mean(&g) - truth);
        rates.extend(samples.acceptance.iter().map(|a| a.rate));
    }
    let bias = mean(&errors);
    let worst_rep = errors.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    let pass = covered >= 17 && bias.abs() < 0.25;
    let ok = report(
        4,
        pass,
        &format!(
            "γ slope 95% coverage {covered}/{REPS} (need ≥ 17), mean bias {bias:+.3} (need |·| < 0.25), largest single-replicate error {worst_rep:.3}; post-burn-in acceptance rates in [{lo:.3}, {hi:.3}]"
        ),
        fits.secs,
        1800.0,
    );
    assert!(ok);
}

#[test]
fn sampler_acceptance_rates_in_band() {
    let _guard = serial();
    let fits = hbkmr_het();
    for samples in &fits.value {
        for a in &samples.acceptance {
            assert!((0.1..=0.6).contains(&a.rate), "{} acceptance {}", a.block, a.rate);
        }
    }
}
