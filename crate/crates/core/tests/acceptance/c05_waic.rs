use std::time::Instant;

use hbkmr::diagnostics::{waic, waic_with, WaicMode};

use crate::common::*;

/// Draws per fit for the h-conditional WAIC.
const CONDITIONAL_DRAWS: usize = 200;

#[test]
fn criterion_05_waic_ordering() {
    let _guard = serial();
    let mut secs = bkmr_het().secs + hbkmr_homo().secs + bkmr_homo().secs;
    let work = Instant::now();

    let mut het_wins = 0;
    let mut het_deltas = Vec::new();
    let mut conditional_wins = 0;
    for (i, rep) in het().iter().enumerate() {
        let h = waic(&hbkmr_het().value[i], &rep.train, &rep.design).unwrap();
        let b = waic(&bkmr_het().value[i], &rep.train, &rep.homo_design).unwrap();
        het_deltas.push(h.waic - b.waic);
        if h.waic < b.waic {
            het_wins += 1;
        }
        let mode = WaicMode::ConditionalH { seed: 500 + i as u64 };
        let (hs, bs) = (&hbkmr_het().value[i], &bkmr_het().value[i]);
        let hc = waic_with(hs, &rep.train, &rep.design, mode, hs.n_draws() / CONDITIONAL_DRAWS).unwrap();
        let bc = waic_with(bs, &rep.train, &rep.homo_design, mode, bs.n_draws() / CONDITIONAL_DRAWS).unwrap();
        if hc.waic < bc.waic {
            conditional_wins += 1;
        }
    }
    let mut homo_deltas = Vec::new();
    for (i, rep) in homo().iter().enumerate() {
        let h = waic(&hbkmr_homo().value[i], &rep.train, &rep.design).unwrap();
        let b = waic(&bkmr_homo().value[i], &rep.train, &rep.homo_design).unwrap();
        homo_deltas.push((h.waic - b.waic).abs());
    }
    secs += work.elapsed().as_secs_f64();
    let het_median = median(&mut het_deltas.clone());
    let homo_median = median(&mut homo_deltas);
    let pass = het_wins >= 18 && homo_median < 10.0;
    let ok = report(
        5,
        pass,
        &format!(
            "heteroscedastic: WAIC(HBKMR) < WAIC(BKMR) in {het_wins}/{REPS} (need ≥ 18), median ΔWAIC {het_median:+.1} (informational, h-conditional WAIC: {conditional_wins}/{REPS}); homoscedastic: median |ΔWAIC| {homo_median:.2} (need < 10)"
        ),
        secs,
        1800.0,
    );
    assert!(ok);
}
