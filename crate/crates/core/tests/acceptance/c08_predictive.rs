use std::time::Instant;

use hbkmr::inference::{predict, DEFAULT_STRIDE};

use crate::common::*;

#[test]
fn criterion_08_predictive_coverage() {
    let _guard = serial();
    let fits = &hbkmr_het().value;
    let start = Instant::now();
    let (mut hits, mut total) = (0usize, 0usize);
    let (mut high, mut low) = (Vec::new(), Vec::new());
    for (samples, rep) in fits.iter().zip(het()) {
        let hold = &rep.holdout;
        let w_new = rep.holdout_design();
        let est = predict(samples, &rep.train, &rep.design, hold.x.as_ref(), hold.z.as_ref(), w_new.as_ref(), DEFAULT_STRIDE).unwrap();
        let p = hold.covariate_index(DRIVER).unwrap();
        for (i, e) in est.iter().enumerate() {
            total += 1;
            if e.lower95 <= hold.y[i] && hold.y[i] <= e.upper95 {
                hits += 1;
            }
            if hold.x[(i, p)] > 0.0 {
                high.push(e.width());
            } else {
                low.push(e.width());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let coverage = hits as f64 / total as f64;
    let (wh, wl) = (mean(&high), mean(&low));
    let pass = (0.90..=0.98).contains(&coverage) && wh > wl;
    let ok = report(
        8,
        pass,
        &format!(
            "pooled 95% predictive coverage {:.1}% over {total} held-out rows (need 90%..98%); mean width high-variance group {wh:.3} vs low {wl:.3}",
            100.0 * coverage
        ),
        secs,
        900.0,
    );
    assert!(ok);
}
