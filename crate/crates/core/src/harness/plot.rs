//! SVG figure of a sweep: compliance on the left, normalized emissions and
//! travel time on the right.

use std::path::Path;

use plotters::prelude::*;

use super::sweep::SweepRow;
use super::HarnessError;
use crate::mechanism::MechanismKind;

const BASELINE: RGBColor = RGBColor(214, 96, 77);
const OPTIMAL: RGBColor = RGBColor(67, 147, 195);

fn series(rows: &[SweepRow], m: MechanismKind, f: impl Fn(&SweepRow) -> f64) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.mechanism == m)
        .map(|r| (r.budget, f(r)))
        .collect()
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

fn draw(rows: &[SweepRow], path: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::new(path, (1200, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let (left, right) = root.split_horizontally(600);
    let (b0, b1) = span(rows.iter().map(|r| r.budget));
    let b1 = if b1 > b0 { b1 } else { b0 + 1.0 };

    let mut chart = ChartBuilder::on(&left)
        .caption("Compliance", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(b0..b1, -0.02f64..1.02)?;
    chart
        .configure_mesh()
        .x_desc("budget")
        .y_desc("compliance ratio")
        .draw()?;
    for (m, color) in [
        (MechanismKind::Baseline, BASELINE),
        (MechanismKind::Optimal, OPTIMAL),
    ] {
        chart
            .draw_series(LineSeries::new(
                series(rows, m, |r| r.compliance_ratio),
                color.stroke_width(2),
            ))?
            .label(m.to_string())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;

    let (y0, y1) = span(
        rows.iter()
            .flat_map(|r| [r.norm_emissions, r.norm_travel_time]),
    );
    let mut chart = ChartBuilder::on(&right)
        .caption("Emissions and travel time", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(b0..b1, y0..y1)?;
    chart
        .configure_mesh()
        .x_desc("budget")
        .y_desc("normalized value")
        .draw()?;
    for (m, color) in [
        (MechanismKind::Baseline, BASELINE),
        (MechanismKind::Optimal, OPTIMAL),
    ] {
        chart
            .draw_series(LineSeries::new(
                series(rows, m, |r| r.norm_emissions),
                color.stroke_width(2),
            ))?
            .label(format!("{m} emissions"))
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
        let light = color.mix(0.45);
        chart
            .draw_series(LineSeries::new(
                series(rows, m, |r| r.norm_travel_time),
                light.stroke_width(2),
            ))?
            .label(format!("{m} travel time"))
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], light.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

/// Writes the sweep figure as SVG.
pub fn emit_plot(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyTable);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if !dir.is_dir() {
            return Err(HarnessError::io(path, "parent directory does not exist"));
        }
    }
    draw(rows, path).map_err(|e| HarnessError::Plot(e.to_string()))
}
