use std::path::Path;

use plotters::prelude::*;

use crate::error::{CliError, CliResult};

const PALETTE: [RGBColor; 4] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(148, 103, 189)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Points,
    /// Vertical `lower..upper` segments with the point estimate.
    Intervals,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Pointwise band drawn around lines or as interval whiskers.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>, style: Style) -> Self {
        Series { label: label.into(), x, y, band: None, style }
    }

    pub fn with_band(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.band = Some((lower, upper));
        self
    }
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub zero_line: bool,
}

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::user(format!("plot: {e}"))
}

fn range(series: &[Series], zero: bool) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = if zero { (0.0, 0.0) } else { (f64::INFINITY, f64::NEG_INFINITY) };
    let widen = |r: &mut (f64, f64), v: f64| {
        if v.is_finite() {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
        }
    };
    for s in series {
        s.x.iter().for_each(|&v| widen(&mut xs, v));
        s.y.iter().for_each(|&v| widen(&mut ys, v));
        if let Some((lo, hi)) = &s.band {
            lo.iter().chain(hi).for_each(|&v| widen(&mut ys, v));
        }
    }
    let pad = |(a, b): (f64, f64)| {
        if !a.is_finite() {
            return (0.0, 1.0);
        }
        let span = if b > a { b - a } else { a.abs().max(1.0) };
        (a - 0.05 * span, b + 0.05 * span)
    };
    (pad(xs), pad(ys))
}

pub fn render(path: &Path, panel: &Panel<'_>, series: &[Series]) -> CliResult<()> {
    let ((x0, x1), (y0, y1)) = range(series, panel.zero_line);
    let root = SVGBackend::new(path, (760, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(panel.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(42)
        .y_label_area_size(64)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc(panel.x_label)
        .y_desc(panel.y_label)
        .draw()
        .map_err(plot_err)?;
    if panel.zero_line {
        chart
            .draw_series(LineSeries::new([(x0, 0.0), (x1, 0.0)], BLACK.mix(0.4).stroke_width(1)))
            .map_err(plot_err)?;
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.x.iter().copied().zip(s.y.iter().copied()).collect();
        let drawn = match s.style {
            Style::Line => {
                if let Some((lo, hi)) = &s.band {
                    for bound in [lo, hi] {
                        let b: Vec<(f64, f64)> = s.x.iter().copied().zip(bound.iter().copied()).collect();
                        chart.draw_series(LineSeries::new(b, color.mix(0.5).stroke_width(1))).map_err(plot_err)?;
                    }
                }
                chart.draw_series(LineSeries::new(pts, color.stroke_width(2))).map_err(plot_err)?
            }
            Style::Points => chart
                .draw_series(pts.into_iter().map(|p| Circle::new(p, 2, color.mix(0.7).filled())))
                .map_err(plot_err)?,
            Style::Intervals => {
                if let Some((lo, hi)) = &s.band {
                    let segments = s.x.iter().zip(lo.iter().zip(hi)).map(|(&x, (&l, &h))| PathElement::new(vec![(x, l), (x, h)], color.stroke_width(1)));
                    chart.draw_series(segments).map_err(plot_err)?;
                }
                chart.draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?
            }
        };
        drawn
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    if series.iter().any(|s| !s.label.is_empty()) {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK.mix(0.3))
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_svg_for_each_style() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let x = vec![0.0, 1.0, 2.0];
        let series = vec![
            Series::new("a", x.clone(), vec![1.0, 0.5, -0.2], Style::Line).with_band(vec![0.5, 0.0, -0.6], vec![1.5, 1.0, 0.3]),
            Series::new("b", x.clone(), vec![0.2, 0.1, 0.0], Style::Points),
            Series::new("c", x, vec![0.0, 0.3, 0.1], Style::Intervals).with_band(vec![-0.5, 0.0, -0.1], vec![0.5, 0.6, 0.3]),
        ];
        render(&path, &Panel { title: "t", x_label: "x", y_label: "y", zero_line: true }, &series).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<circle"));
    }

    #[test]
    fn degenerate_ranges_are_padded() {
        let s = [Series::new("", vec![1.0], vec![2.0], Style::Points)];
        let ((x0, x1), (y0, y1)) = range(&s, false);
        assert!(x0 < 1.0 && x1 > 1.0 && y0 < 2.0 && y1 > 2.0);
        let ((_, _), (y0, _)) = range(&s, true);
        assert!(y0 < 0.0);
    }
}
