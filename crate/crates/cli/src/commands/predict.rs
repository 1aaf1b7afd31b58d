use std::path::Path;

use hbkmr::data::load_csv_like;
use hbkmr::inference::predict as predict_rows;

use crate::artifact::{create_dir, FitArtifact};
use crate::error::CliResult;
use crate::plot::{render, Panel, Series, Style};
use crate::table::{estimate_fields, CsvOut, ESTIMATE_HEADER};

/// 95% posterior predictive intervals for the rows of `input`, which must
/// carry the same columns as the fitted data.
pub fn predict(art: &FitArtifact, input: &Path, stride: usize, out: &Path) -> CliResult<()> {
    create_dir(out)?;
    let (new, dropped) = load_csv_like(input, &art.study.data)?;
    if dropped.dropped_rows > 0 {
        log::warn!("dropped {} of {} prediction rows with missing values", dropped.dropped_rows, dropped.total_rows);
    }
    let w_new = art.study.design.apply(&new)?;
    let est = predict_rows(&art.samples, &art.study.data, &art.study.design, new.x.as_ref(), new.z.as_ref(), w_new.as_ref(), stride)?;

    let mut csv = CsvOut::create(&out.join("predictions.csv"), &[&["row", "observed"][..], &ESTIMATE_HEADER[..], &["covered"][..]].concat())?;
    let mut covered = 0;
    for (i, e) in est.iter().enumerate() {
        let hit = e.lower95 <= new.y[i] && new.y[i] <= e.upper95;
        covered += usize::from(hit);
        let head = [(i + 1).to_string(), new.y[i].to_string()];
        csv.row(head.into_iter().chain(estimate_fields(e)).chain([hit.to_string()]))?;
    }
    csv.finish()?;
    println!("{covered}/{} observed values inside their 95% predictive interval", est.len());

    let x: Vec<f64> = (1..=est.len()).map(|i| i as f64).collect();
    let series = [
        Series::new("95% predictive interval", x.clone(), est.iter().map(|e| e.estimate).collect(), Style::Intervals)
            .with_band(est.iter().map(|e| e.lower95).collect(), est.iter().map(|e| e.upper95).collect()),
        Series::new("observed", x, new.y.clone(), Style::Points),
    ];
    let panel = Panel { title: "Posterior predictive intervals", x_label: "row", y_label: &new.outcome_name, zero_line: false };
    render(&out.join("predictions.svg"), &panel, &series)
}
