//! Deterministic report artifacts: CSV tables and dependency-free SVG plots.
//!
//! Everything here is a pure function of its inputs with fixed formatting,
//! so repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::metrics::{HistBin, TimePoint};
use crate::models::WganLogRow;
use crate::Result;

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(fs::write(path, content)?)
}

/// `epsilon.csv` / `sigma_rel.csv` schema: one row per (variant, time index).
pub fn render_curve_csv(rows: &[(String, Vec<TimePoint>)]) -> String {
    let mut out = String::from("variant,t_index,value,skipped\n");
    for (variant, curve) in rows {
        for p in curve {
            let _ = writeln!(out, "{variant},{},{},{}", p.t, p.value, p.skipped);
        }
    }
    out
}

pub fn write_curve_csv(path: &Path, rows: &[(String, Vec<TimePoint>)]) -> Result<()> {
    write_file(path, &render_curve_csv(rows))
}

/// `amplitude_hist.csv` schema: one row per (source, bin).
pub fn render_hist_csv(sources: &[(String, Vec<HistBin>)]) -> String {
    let mut out = String::from("source,bin_lo,bin_hi,count\n");
    for (source, bins) in sources {
        for b in bins {
            let _ = writeln!(out, "{source},{},{},{}", b.lo, b.hi, b.count);
        }
    }
    out
}

pub fn write_hist_csv(path: &Path, sources: &[(String, Vec<HistBin>)]) -> Result<()> {
    write_file(path, &render_hist_csv(sources))
}

/// Training-loss log for the deterministic regressors.
pub fn write_loss_csv(path: &Path, curve: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        let _ = writeln!(out, "{e},{l}");
    }
    write_file(path, &out)
}

/// Training log for the adversarial pair.
pub fn write_wgan_log_csv(path: &Path, log: &[WganLogRow]) -> Result<()> {
    let mut out = String::from("epoch,d_loss,g_loss,wasserstein,gp\n");
    for r in log {
        let _ = writeln!(out, "{},{},{},{},{}", r.epoch, r.d_loss, r.g_loss, r.wasserstein, r.gp);
    }
    write_file(path, &out)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 44.0;

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e-3 && v.abs() < 1e4 {
        format!("{v:.4}")
    } else {
        format!("{v:.2e}")
    }
}

/// Multi-series line plot. Skipped points (encoded as NaN y values by the
/// caller) break the polyline.
pub fn render_line_svg(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (x_min, x_max) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    let (y_min, y_max) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| (lo.min(*y), hi.max(*y)));
    let (x_min, x_max) = if finite.is_empty() { (0.0, 1.0) } else { (x_min, x_max) };
    let (y_min, y_max) = if finite.is_empty() { (0.0, 1.0) } else { (y_min, y_max) };
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_span = if y_max > y_min { y_max - y_min } else { 1.0 };
    let iw = PLOT_W - MARGIN_L - MARGIN_R;
    let ih = PLOT_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / x_span * iw;
    let sy = |y: f64| MARGIN_T + ih - (y - y_min) / y_span * ih;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        PLOT_W / 2.0
    );
    // Axes.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        fmt(iw),
        fmt(ih)
    );
    for k in 0..=4 {
        let xv = x_min + x_span * k as f64 / 4.0;
        let yv = y_min + y_span * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            fmt(sx(xv)),
            fmt(MARGIN_T + ih + 16.0),
            fmt_tick(xv)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            fmt(MARGIN_L - 4.0),
            fmt(sy(yv) + 3.0),
            fmt_tick(yv)
        );
    }
    for (s, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        // Break the polyline at non-finite points.
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, svg: &mut String| {
            if run.len() >= 2 {
                let _ = writeln!(
                    svg,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                    run.join(" ")
                );
            }
            run.clear();
        };
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                run.push(format!("{},{}", fmt(sx(x)), fmt(sy(y))));
            } else {
                flush(&mut run, &mut svg);
            }
        }
        flush(&mut run, &mut svg);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" fill=\"{color}\">{label}</text>",
            fmt(MARGIN_L + 8.0),
            fmt(MARGIN_T + 14.0 + 13.0 * s as f64)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_line_svg(path: &Path, title: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    write_file(path, &render_line_svg(title, series))
}

/// Convert an indicator curve to plot points, breaking at skipped indices.
pub fn curve_points(curve: &[TimePoint]) -> Vec<(f64, f64)> {
    curve
        .iter()
        .map(|p| (p.t as f64, if p.skipped { f64::NAN } else { p.value }))
        .collect()
}

/// Heatmap of a row-major `[n_y, n_x]` frame with a symmetric blue-white-red
/// scale around zero.
pub fn render_heatmap_svg(title: &str, n_x: usize, n_y: usize, values: &[f64]) -> String {
    assert_eq!(values.len(), n_x * n_y, "heatmap shape mismatch");
    let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let iw = PLOT_W - MARGIN_L - MARGIN_R;
    let ih = PLOT_H - MARGIN_T - MARGIN_B;
    let cw = iw / n_x as f64;
    let ch = ih / n_y as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        PLOT_W / 2.0
    );
    for j in 0..n_y {
        for i in 0..n_x {
            let v = values[j * n_x + i] / vmax;
            // v = -1 -> blue, 0 -> white, +1 -> red.
            let (r, g, b) = if v >= 0.0 {
                (255, (255.0 * (1.0 - v)) as u8, (255.0 * (1.0 - v)) as u8)
            } else {
                ((255.0 * (1.0 + v)) as u8, (255.0 * (1.0 + v)) as u8, 255)
            };
            // Row 0 is the bottom of the domain.
            let x = MARGIN_L + i as f64 * cw;
            let y = MARGIN_T + ih - (j + 1) as f64 * ch;
            let _ = writeln!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({r},{g},{b})\"/>",
                fmt(x),
                fmt(y),
                fmt(cw + 0.05),
                fmt(ch + 0.05)
            );
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">max |value| = {}</text>",
        PLOT_W / 2.0,
        fmt(MARGIN_T + ih + 20.0),
        fmt_tick(vmax)
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn write_heatmap_svg(path: &Path, title: &str, n_x: usize, n_y: usize, values: &[f64]) -> Result<()> {
    write_file(path, &render_heatmap_svg(title, n_x, n_y, values))
}

/// Histogram bar chart with one color per source, bars side by side.
pub fn render_hist_svg(title: &str, sources: &[(String, Vec<HistBin>)]) -> String {
    let max_count = sources
        .iter()
        .flat_map(|(_, bins)| bins.iter().map(|b| b.count))
        .max()
        .unwrap_or(1)
        .max(1);
    let n_bins = sources.first().map(|(_, b)| b.len()).unwrap_or(0).max(1);
    let n_src = sources.len().max(1);
    let iw = PLOT_W - MARGIN_L - MARGIN_R;
    let ih = PLOT_H - MARGIN_T - MARGIN_B;
    let group_w = iw / n_bins as f64;
    let bar_w = group_w / n_src as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        PLOT_W / 2.0
    );
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        fmt(iw),
        fmt(ih)
    );
    for (s, (label, bins)) in sources.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        for (k, bin) in bins.iter().enumerate() {
            let h = ih * bin.count as f64 / max_count as f64;
            let x = MARGIN_L + k as f64 * group_w + s as f64 * bar_w;
            let y = MARGIN_T + ih - h;
            let _ = writeln!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" fill-opacity=\"0.8\"/>",
                fmt(x),
                fmt(y),
                fmt(bar_w.max(0.5)),
                fmt(h)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" fill=\"{color}\">{label}</text>",
            fmt(MARGIN_L + 8.0),
            fmt(MARGIN_T + 14.0 + 13.0 * s as f64)
        );
    }
    if let Some((_, bins)) = sources.first() {
        if let (Some(first), Some(last)) = (bins.first(), bins.last()) {
            let _ = writeln!(
                svg,
                "<text x=\"{MARGIN_L}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\">{}</text>",
                fmt(MARGIN_T + ih + 16.0),
                fmt_tick(first.lo)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">{}</text>",
                fmt(MARGIN_L + iw),
                fmt(MARGIN_T + ih + 16.0),
                fmt_tick(last.hi)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_hist_svg(path: &Path, title: &str, sources: &[(String, Vec<HistBin>)]) -> Result<()> {
    write_file(path, &render_hist_svg(title, sources))
}
