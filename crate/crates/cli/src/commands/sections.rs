use std::path::Path;

use hbkmr::inference::{joint_effects, single_variable_effects, univariate_curve};
use hbkmr::EffectEstimate;

use crate::artifact::{create_dir, FitArtifact};
use crate::config::SectionSpec;
use crate::error::CliResult;
use crate::plot::{render, Panel, Series, Style};
use crate::table::{estimate_fields, percent_change, slug, CsvOut, ESTIMATE_HEADER};

struct Sections {
    label: String,
    curves: Vec<hbkmr::inference::UnivariateCurve<f64>>,
    joint: Vec<(f64, EffectEstimate)>,
    single: Vec<EffectEstimate>,
}

fn compute(art: &FitArtifact, spec: &SectionSpec, targets: &[f64], stride: usize) -> CliResult<Sections> {
    let (d, w, s) = (&art.study.data, &art.study.design, &art.samples);
    let curves = (0..d.m()).map(|m| univariate_curve(s, d, w, m, spec.grid, stride)).collect::<Result<Vec<_>, _>>()?;
    let joint = joint_effects(s, d, w, spec.base, targets, stride)?;
    let single = single_variable_effects(s, d, w, &spec.fixed, stride)?;
    Ok(Sections { label: art.label(), curves, joint: targets.iter().copied().zip(joint).collect(), single })
}

/// One contrast compared between two fits.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    pub table: &'static str,
    pub contrast: String,
    pub width_a: f64,
    pub width_b: f64,
    /// `100·(width_b − width_a)/width_a`, rounded to 0.1.
    pub width_change_pct: f64,
}

/// Univariate curves, joint effects and single-variable effects, with an
/// optional second fit overlaid. Returns the per-contrast width comparison
/// when overlaying.
pub fn sections(
    art: &FitArtifact,
    overlay: Option<&FitArtifact>,
    spec: &SectionSpec,
    stride: usize,
    out: &Path,
) -> CliResult<Vec<OverlayRow>> {
    spec.validate()?;
    if let Some(other) = overlay {
        art.compatible(other)?;
    }
    create_dir(out)?;
    // the base-vs-base contrast is identically zero
    let targets: Vec<f64> = spec.targets.iter().copied().filter(|q| (q - spec.base).abs() > 1e-9).collect();
    let mut all = vec![compute(art, spec, &targets, stride)?];
    if let Some(other) = overlay {
        all.push(compute(other, spec, &targets, stride)?);
    }

    let mut csv = CsvOut::create(
        &out.join("curves.csv"),
        &[&["model", "exposure", "grid", "grid_original"][..], &ESTIMATE_HEADER[..]].concat(),
    )?;
    for s in &all {
        for c in &s.curves {
            for (k, e) in c.estimates.iter().enumerate() {
                let head = [s.label.clone(), c.exposure.clone(), c.grid[k].to_string(), c.grid_original[k].to_string()];
                csv.row(head.into_iter().chain(estimate_fields(e)))?;
            }
        }
    }
    csv.finish()?;

    let mut csv = CsvOut::create(&out.join("joint_effects.csv"), &[&["model", "quantile", "base"][..], &ESTIMATE_HEADER[..]].concat())?;
    for s in &all {
        for (q, e) in &s.joint {
            let head = [s.label.clone(), q.to_string(), spec.base.to_string()];
            csv.row(head.into_iter().chain(estimate_fields(e)))?;
        }
    }
    csv.finish()?;

    let mut csv = CsvOut::create(&out.join("single_variable.csv"), &[&["model", "contrast"][..], &ESTIMATE_HEADER[..]].concat())?;
    for s in &all {
        for e in &s.single {
            csv.row([s.label.clone(), e.label.clone()].into_iter().chain(estimate_fields(e)))?;
        }
    }
    csv.finish()?;

    for (m, name) in art.study.data.exposure_names.iter().enumerate() {
        let series: Vec<Series> = all
            .iter()
            .map(|s| {
                let c = &s.curves[m];
                let pick = |f: fn(&EffectEstimate) -> f64| c.estimates.iter().map(f).collect::<Vec<_>>();
                Series::new(&s.label, c.grid.clone(), pick(|e| e.estimate), Style::Line).with_band(pick(|e| e.lower95), pick(|e| e.upper95))
            })
            .collect();
        let title = format!("h({name}), other exposures at their medians");
        let x_label = format!("{name} (standardized log scale)");
        render(&out.join(format!("curve_{}.svg", slug(name))), &Panel { title: &title, x_label: &x_label, y_label: "h", zero_line: true }, &series)?;
    }

    let n_models = all.len() as f64;
    let joint_series: Vec<Series> = all
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let shift = 0.008 * (k as f64 - (n_models - 1.0) / 2.0);
            let x = s.joint.iter().map(|(q, _)| q + shift).collect();
            let pick = |f: fn(&EffectEstimate) -> f64| s.joint.iter().map(|(_, e)| f(e)).collect::<Vec<_>>();
            Series::new(&s.label, x, pick(|e| e.estimate), Style::Intervals).with_band(pick(|e| e.lower95), pick(|e| e.upper95))
        })
        .collect();
    let title = format!("Joint effect of all exposures vs quantile {}", spec.base);
    render(&out.join("joint_effects.svg"), &Panel { title: &title, x_label: "quantile", y_label: "h(z_q) - h(z_base)", zero_line: true }, &joint_series)?;

    let single_series: Vec<Series> = all
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let x = (0..s.single.len()).map(|i| i as f64 + 0.15 * k as f64).collect();
            let pick = |f: fn(&EffectEstimate) -> f64| s.single.iter().map(f).collect::<Vec<_>>();
            Series::new(&s.label, x, pick(|e| e.estimate), Style::Intervals).with_band(pick(|e| e.lower95), pick(|e| e.upper95))
        })
        .collect();
    render(
        &out.join("single_variable.svg"),
        &Panel { title: "Single-exposure effects, 75th vs 25th percentile", x_label: "contrast (see single_variable.csv)", y_label: "effect", zero_line: true },
        &single_series,
    )?;

    let mut rows = Vec::new();
    if let [a, b] = &all[..] {
        let joint = a.joint.iter().zip(&b.joint).map(|((_, x), (_, y))| ("joint", x, y));
        let single = a.single.iter().zip(&b.single).map(|(x, y)| ("single", x, y));
        for (table, x, y) in joint.chain(single) {
            let (wa, wb) = (x.width(), y.width());
            rows.push(OverlayRow { table, contrast: x.label.clone(), width_a: wa, width_b: wb, width_change_pct: percent_change(wa, wb) });
        }
        let mut csv = CsvOut::create(&out.join("overlay.csv"), &["table", "contrast", "model_a", "model_b", "width_a", "width_b", "width_change_pct"])?;
        for r in &rows {
            csv.row([
                r.table.to_string(),
                r.contrast.clone(),
                a.label.clone(),
                b.label.clone(),
                r.width_a.to_string(),
                r.width_b.to_string(),
                format!("{:.1}", r.width_change_pct),
            ])?;
        }
        csv.finish()?;
    }
    Ok(rows)
}

/// Table of overlay rows as printed by the CLI.
pub fn overlay_text(rows: &[OverlayRow], label_a: &str, label_b: &str) -> String {
    let mut s = format!("CI width change of {label_b} relative to {label_a}\n");
    s.push_str(&format!("{:<8} {:<44} {:>10} {:>10} {:>9}\n", "table", "contrast", "width A", "width B", "change %"));
    for r in rows {
        s.push_str(&format!(
            "{:<8} {:<44} {:>10.4} {:>10.4} {:>9.1}\n",
            r.table, r.contrast, r.width_a, r.width_b, r.width_change_pct
        ));
    }
    s
}
