//! Renders `results.json` into a long-format CSV and SVG scatter plots of
//! each classification metric against QSAR MAE.

use std::fmt::Write as _;
use std::path::PathBuf;

use cliffbench_core::eval::{SetKind, SetMetrics, SetSummary, Summary};

use crate::error::{require, Result};
use crate::io;
use crate::pipeline::{Results, Workspace, RESULTS};

pub const LONG_CSV: &str = "results_long.csv";
pub const PLOT_DIR: &str = "plots";

/// Classification metrics that get a plot, per MMP set.
pub const PLOTTED: [&str; 5] = [
    "ac_mcc",
    "ac_sensitivity",
    "ac_precision",
    "pd_accuracy",
    "pd_accuracy_on_predicted_acs",
];

fn set_metric(m: &SetMetrics, name: &str) -> Option<f64> {
    match name {
        "ac_mcc" => Some(m.ac_mcc),
        "ac_sensitivity" => m.ac_sensitivity,
        "ac_precision" => m.ac_precision,
        "pd_accuracy" => m.pd_accuracy,
        "pd_accuracy_on_predicted_acs" => m.pd_accuracy_on_predicted_acs,
        "n_mmps" => Some(m.n_mmps as f64),
        _ => None,
    }
}

fn summary_metric(s: &SetSummary, name: &str) -> Summary {
    match name {
        "ac_mcc" => s.ac_mcc,
        "ac_sensitivity" => s.ac_sensitivity,
        "ac_precision" => s.ac_precision,
        "pd_accuracy" => s.pd_accuracy,
        _ => s.pd_accuracy_on_predicted_acs,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per model × trial × set × metric; undefined values are empty.
pub fn long_rows(results: &Results) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for model in &results.models {
        for t in &model.report.trials {
            let mut push = |set: &str, metric: &str, value: Option<f64>| {
                rows.push(vec![
                    model.report.model.clone(),
                    model.training.clone(),
                    t.i.to_string(),
                    t.j.to_string(),
                    set.to_string(),
                    metric.to_string(),
                    cell(value),
                    results.config_digest.clone(),
                ]);
            };
            push("d_test", "qsar_mae", Some(t.qsar_mae));
            for (kind, m) in &t.sets {
                for metric in PLOTTED.iter().chain(&["n_mmps"]) {
                    push(kind.as_str(), metric, set_metric(m, metric));
                }
            }
        }
    }
    rows
}

struct Point {
    label: String,
    x: f64,
    x_err: f64,
    y: f64,
    y_err: f64,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter plot with ±2 standard deviation error bars on both axes.
fn scatter(title: &str, x_label: &str, points: &[Point], digest: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, "<!-- config_digest {digest} -->");
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1) = range(
        points.iter().map(|p| p.x - p.x_err).fold(f64::INFINITY, f64::min),
        points.iter().map(|p| p.x + p.x_err).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = range(
        points.iter().map(|p| p.y - p.y_err).fold(f64::INFINITY, f64::min),
        points.iter().map(|p| p.y + p.y_err).fold(f64::NEG_INFINITY, f64::max),
    );
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text>"#,
            px(xv),
            H - BOTTOM + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#,
            LEFT - 6.0,
            py(yv) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">QSAR MAE</text>"#,
        TOP + (H - TOP - BOTTOM) / 2.0
    );
    for p in points {
        let (cx, cy) = (px(p.x), py(p.y));
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{cy:.1}" x2="{:.1}" y2="{cy:.1}" stroke="grey"/>"#,
            px(p.x - p.x_err),
            px(p.x + p.x_err)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="grey"/>"#,
            py(p.y - p.y_err),
            py(p.y + p.y_err)
        );
        let _ = writeln!(svg, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="4" fill="steelblue"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            cx + 6.0,
            cy - 6.0,
            escape(&p.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn plots(results: &Results) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for kind in SetKind::ALL {
        for metric in PLOTTED {
            let points: Vec<Point> = results
                .models
                .iter()
                .filter_map(|m| {
                    let s = summary_metric(m.report.sets.get(&kind)?, metric);
                    let mae = m.report.qsar_mae;
                    Some(Point {
                        label: m.report.model.clone(),
                        x: s.mean?,
                        x_err: 2.0 * s.std.unwrap_or(0.0),
                        y: mae.mean?,
                        y_err: 2.0 * mae.std.unwrap_or(0.0),
                    })
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            let title = format!("{metric} on M_{} vs QSAR MAE", kind.as_str());
            let name = format!("{}_{metric}.svg", kind.as_str());
            out.push((name, scatter(&title, metric, &points, &results.config_digest)));
        }
    }
    out
}

/// Writes the long CSV and plots from `results.json` alone.
pub fn render(ws: &Workspace) -> Result<Vec<PathBuf>> {
    let results: Results = io::read_json(&require(ws.path(RESULTS), "eval")?)?;
    let mut written = Vec::new();
    let csv = ws.path(LONG_CSV);
    io::write_table(
        &csv,
        &["model", "training", "i", "j", "set", "metric", "value", "config_digest"],
        &long_rows(&results),
    )?;
    written.push(csv);
    for (name, svg) in plots(&results) {
        let path = ws.path(PLOT_DIR).join(name);
        io::write_text(&path, &svg)?;
        written.push(path);
    }
    Ok(written)
}
