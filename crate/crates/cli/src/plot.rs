//! SVG plots of result tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;
use crate::output::Row;

const SIZE: (u32, u32) = (800, 600);
const COLORS: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

struct Series {
    label: String,
    points: Vec<(f64, f64, f64)>,
}

/// Writes `q_vs_T.svg`, plus `q_vs_M.svg` / `q_vs_L.svg` when the table
/// scans beads or box length. Returns the files written.
pub fn plot_results(rows: &[Row], out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if rows.is_empty() {
        return Err(CliError::Config("result table has no rows".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(format!("create {}", out_dir.display()), e))?;
    let mut written = Vec::new();

    let by_setting = group(rows, |r| format!("M={} L={}", r.beads, r.box_l), |r| r.t_k);
    let path = out_dir.join("q_vs_T.svg");
    draw(&path, "Q vs temperature", "T / K", &by_setting)?;
    written.push(path);

    if distinct(rows, |r| r.beads as f64) > 1 {
        let s = group(rows, |r| format!("T={} K L={}", r.t_k, r.box_l), |r| r.beads as f64);
        let path = out_dir.join("q_vs_M.svg");
        draw(&path, "Q vs bead number", "M", &s)?;
        written.push(path);
    }
    if distinct(rows, |r| r.box_l) > 1 {
        let s = group(rows, |r| format!("T={} K M={}", r.t_k, r.beads), |r| r.box_l);
        let path = out_dir.join("q_vs_L.svg");
        draw(&path, "Q vs box length", "L / bohr", &s)?;
        written.push(path);
    }
    Ok(written)
}

fn distinct(rows: &[Row], key: impl Fn(&Row) -> f64) -> usize {
    let mut v: Vec<f64> = rows.iter().map(key).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn group(rows: &[Row], label: impl Fn(&Row) -> String, x: impl Fn(&Row) -> f64) -> Vec<Series> {
    let mut map: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in rows {
        let sigma = if r.q_sigma.is_finite() { r.q_sigma } else { 0.0 };
        map.entry(label(r)).or_default().push((x(r), r.q_mean, sigma));
    }
    map.into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect()
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

fn draw(path: &Path, title: &str, x_label: &str, series: &[Series]) -> Result<(), CliError> {
    let err = |e: String| CliError::Other(format!("plot {}: {e}", path.display()));
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, s) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - s);
        y1 = y1.max(y + s);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 24))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("Q")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().map(|p| (p.0, p.1)), color.stroke_width(2)))
            .map_err(|e| err(e.to_string()))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(s.points.iter().map(|&(x, y, sig)| {
                ErrorBar::new_vertical(x, y - sig, y, y + sig, color.filled(), 8)
            }))
            .map_err(|e| err(e.to_string()))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))?;
    Ok(())
}
