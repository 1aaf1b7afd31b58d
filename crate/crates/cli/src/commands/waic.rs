use std::fmt::Write as _;
use std::path::Path;

use hbkmr::diagnostics::{compare, waic_with, ComparisonRow, WaicMode};

use crate::artifact::{create_dir, FitArtifact};
use crate::error::{CliError, CliResult};
use crate::table::CsvOut;

/// WAIC of each fit, ranked best first. Labels default to the model label
/// and directory name.
pub fn waic(arts: &[&FitArtifact], labels: &[String], stride: usize, out: Option<&Path>) -> CliResult<(Vec<ComparisonRow>, String)> {
    if arts.is_empty() {
        return Err(CliError::user("waic needs at least one fit"));
    }
    if !labels.is_empty() && labels.len() != arts.len() {
        return Err(CliError::user(format!("{} labels given for {} fits", labels.len(), arts.len())));
    }
    for other in &arts[1..] {
        arts[0].compatible(other)?;
    }
    let labels: Vec<String> = if labels.is_empty() { arts.iter().map(|a| a.label()).collect() } else { labels.to_vec() };
    let results = arts
        .iter()
        .map(|a| waic_with(&a.samples, &a.study.data, &a.study.design, WaicMode::Marginal, stride))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = compare(&results, &labels)?;

    let mut text = String::from("Comparison of WAIC values (lower is better)\n");
    writeln!(text, "{:<28} {:>12} {:>10} {:>10} {:>12}", "model", "WAIC", "ΔWAIC", "p_WAIC", "lppd").unwrap();
    for r in &rows {
        writeln!(text, "{:<28} {:>12.1} {:>10.1} {:>10.1} {:>12.1}", r.label, r.waic, r.delta, r.p_waic, r.lppd).unwrap();
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        let mut csv = CsvOut::create(&dir.join("waic.csv"), &["model", "waic", "delta", "p_waic", "lppd"])?;
        for r in &rows {
            csv.row([r.label.clone(), r.waic.to_string(), r.delta.to_string(), r.p_waic.to_string(), r.lppd.to_string()])?;
        }
        csv.finish()?;
    }
    Ok((rows, text))
}
