use std::time::Instant;

use hbkmr::inference::{joint_effects, DEFAULT_STRIDE};

use crate::common::*;

#[test]
fn criterion_06_ci_width_direction() {
    let _guard = serial();
    let (hfits, bfits) = (&hbkmr_het().value, &bkmr_het().value);
    let start = Instant::now();
    let targets = joint_targets();
    let mut reductions = Vec::new();
    let mut narrower = 0;
    for (i, rep) in het().iter().enumerate() {
        let h = joint_effects(&hfits[i], &rep.train, &rep.design, 0.25, &targets, DEFAULT_STRIDE).unwrap();
        let b = joint_effects(&bfits[i], &rep.train, &rep.homo_design, 0.25, &targets, DEFAULT_STRIDE).unwrap();
        let wh = median(&mut h.iter().map(|e| e.width()).collect::<Vec<_>>());
        let wb = median(&mut b.iter().map(|e| e.width()).collect::<Vec<_>>());
        if wh < wb {
            narrower += 1;
        }
        reductions.push(1.0 - wh / wb);
    }
    let secs = start.elapsed().as_secs_f64();
    let med = median(&mut reductions.clone());
    let pass = (0.02..=0.30).contains(&med);
    let ok = report(
        6,
        pass,
        &format!(
            "median CI-width reduction HBKMR vs BKMR {:.1}% (need 2%..30%); HBKMR narrower in {narrower}/{REPS} replicates",
            100.0 * med
        ),
        secs,
        1200.0,
    );
    assert!(ok);
}
