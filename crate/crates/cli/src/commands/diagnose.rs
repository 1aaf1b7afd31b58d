use std::fmt::Write as _;
use std::path::Path;

use hbkmr::data::Covariate;
use hbkmr::diagnostics::{bayesian_residuals, candidate_predictors, linear_approx_residuals};
use hbkmr::{Dataset, ResidualReport};

use crate::artifact::{create_dir, FitArtifact};
use crate::error::CliResult;
use crate::plot::{render, Panel, Series, Style};
use crate::table::{slug, CsvOut};

/// Values plotted against residuals: exposures on the fitted scale, numeric
/// covariates as entered, factors as level codes.
fn predictor_values(d: &Dataset, name: &str) -> Option<Vec<f64>> {
    if let Some(m) = d.exposure_index(name) {
        return Some(d.exposure_column(m));
    }
    d.covariates.iter().find_map(|c| match c {
        Covariate::Numeric { name: n, column } if n == name => Some(d.x.col(*column).iter().copied().collect()),
        Covariate::Categorical(f) if f.name == name => Some(f.codes.iter().map(|&c| c as f64).collect()),
        _ => None,
    })
}

fn method_name(r: &ResidualReport) -> &'static str {
    match r.method {
        hbkmr::diagnostics::ResidualMethod::PosteriorMeanH => "posterior-mean-h",
        hbkmr::diagnostics::ResidualMethod::LinearApproximation => "linear-approx",
    }
}

/// Residuals from both methods, the association table and residual plots.
/// Returns the association table as text.
pub fn diagnose(art: &FitArtifact, predictors: Option<&[String]>, out: &Path) -> CliResult<String> {
    create_dir(out)?;
    let d = &art.study.data;
    let names: Vec<String> = predictors.map(<[String]>::to_vec).unwrap_or_else(|| candidate_predictors(d));
    let bayes = bayesian_residuals(&art.samples, d, &art.study.design, Some(&names))?;
    let linear = linear_approx_residuals(d, Some(&names))?;
    let reports = [&bayes, &linear];

    let mut csv = CsvOut::create(
        &out.join("residuals.csv"),
        &["row", "observed", "fitted_posterior_mean_h", "residual_posterior_mean_h", "fitted_linear_approx", "residual_linear_approx"],
    )?;
    for i in 0..d.n() {
        csv.row([
            (i + 1).to_string(),
            d.y[i].to_string(),
            bayes.fitted[i].to_string(),
            bayes.residuals[i].to_string(),
            linear.fitted[i].to_string(),
            linear.residuals[i].to_string(),
        ])?;
    }
    csv.finish()?;

    let mut csv = CsvOut::create(&out.join("associations.csv"), &["method", "predictor", "spearman_abs_residual", "variance_ratio", "flagged"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut text = String::new();
    writeln!(text, "{:<18} {:<16} {:>10} {:>10}  flag", "method", "predictor", "spearman", "var.ratio").unwrap();
    for r in reports {
        for a in &r.associations {
            csv.row([method_name(r).to_string(), a.predictor.clone(), opt(a.spearman), opt(a.variance_ratio), a.flagged.to_string()])?;
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
            writeln!(
                text,
                "{:<18} {:<16} {:>10} {:>10}  {}",
                method_name(r),
                a.predictor,
                fmt(a.spearman),
                fmt(a.variance_ratio),
                if a.flagged { "*" } else { "" }
            )
            .unwrap();
        }
    }
    csv.finish()?;

    for r in reports {
        let panel = Panel { title: "Residuals vs fitted", x_label: "fitted", y_label: "residual", zero_line: true };
        let s = Series::new(method_name(r), r.fitted.clone(), r.residuals.clone(), Style::Points);
        render(&out.join(format!("residuals_vs_fitted_{}.svg", slug(method_name(r)))), &panel, &[s])?;
    }
    for name in &names {
        let Some(x) = predictor_values(d, name) else { continue };
        let title = format!("Residuals vs {name}");
        let panel = Panel { title: &title, x_label: name, y_label: "residual", zero_line: true };
        let series: Vec<Series> =
            reports.iter().map(|r| Series::new(method_name(r), x.clone(), r.residuals.clone(), Style::Points)).collect();
        render(&out.join(format!("residuals_vs_{}.svg", slug(name))), &panel, &series)?;
    }
    Ok(text)
}
