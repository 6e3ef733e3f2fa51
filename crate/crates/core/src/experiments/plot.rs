//! Minimal SVG line charts for training curves and load sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::episode::read_completion_curve;
use crate::error::{Error, Result};

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, _) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    // completion rates live in [0, 1]
    let (y0, y1) = (0.0, 1.0);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y.clamp(y0, y1) - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for k in 0..=5 {
        let y = y0 + (y1 - y0) * k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y:.1}</text>"#, PAD - 6.0, sy(y) + 4.0);
        let x = x0 + (x1 - x0) * k as f64 / 5.0;
        let _ =
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, sx(x), H - PAD + 16.0, fmt_tick(x));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = H / 2.0
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{a}" y1="{ly}" x2="{b}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{c}" y="{t}">{}</text>"#,
            escape(&ser.label),
            a = W - PAD - 110.0,
            b = W - PAD - 90.0,
            c = W - PAD - 84.0,
            t = ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

/// Trailing moving average over up to `window` points.
pub fn moving_average(points: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    let window = window.max(1);
    (0..points.len())
        .map(|k| {
            let lo = (k + 1).saturating_sub(window);
            let slice = &points[lo..=k];
            (points[k].0, slice.iter().map(|p| p.1).sum::<f64>() / slice.len() as f64)
        })
        .collect()
}

/// Renders a metrics file (training curve) or a load-sweep file into SVG,
/// picking the chart from the CSV header.
pub fn plot_csv(input: &Path, output: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(input)?;
    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let svg = if headers.iter().any(|h| h == "episode") {
        let raw: Vec<(f64, f64)> = read_completion_curve(input)?.into_iter().map(|(e, c)| (e as f64, c)).collect();
        let smooth = moving_average(&raw, 10);
        line_chart_svg(
            "Training",
            "episode",
            "completion rate",
            &[
                Series { label: "per episode".into(), points: raw },
                Series { label: "10-ep mean".into(), points: smooth },
            ],
        )
    } else if headers.iter().any(|h| h == "load") {
        let mut by_policy: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for rec in reader.records() {
            let rec = rec?;
            let bad = || Error::config("plot", format!("unparsable row in {}", input.display()));
            let load: f64 = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let policy = rec.get(1).ok_or_else(bad)?.to_string();
            let c: f64 = rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            by_policy.entry(policy).or_default().push((load, c));
        }
        let series: Vec<Series> = by_policy.into_iter().map(|(label, points)| Series { label, points }).collect();
        line_chart_svg("Completion rate vs load", "requests per satellite", "completion rate", &series)
    } else {
        return Err(Error::config("plot", format!("{} is neither a metrics nor a load file", input.display())));
    };
    std::fs::write(output, svg).map_err(|e| Error::io(output, e))
}
