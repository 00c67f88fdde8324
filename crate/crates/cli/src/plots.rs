//! Plot-data CSVs and a small built-in SVG renderer.
//!
//! From the results rows the grid emits, per swept axis, a
//! `plot_error_vs_<axis>.csv` with mean error and standard error per
//! (axis value, method, parameter), plus a `plot_scatter.csv` of
//! truth/estimate pairs. Matching SVG files (lines per method/parameter,
//! scatter with the identity diagonal) go to `plots/`. No external
//! plotting dependency; the SVGs are static result displays.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bcm_core::metrics::ResultRow;
use bcm_core::Result;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Axes a grid can sweep, with row accessors.
fn axes() -> Vec<(&'static str, fn(&ResultRow) -> Option<f64>)> {
    vec![
        ("t", |r: &ResultRow| Some(f64::from(r.t))),
        ("n", |r: &ResultRow| Some(f64::from(r.n))),
        ("f", |r: &ResultRow| r.f.map(f64::from)),
        ("xi", |r: &ResultRow| r.xi),
        ("leader_frac", |r: &ResultRow| r.leader_frac),
    ]
}

/// Write every plot artifact for a set of result rows; returns the paths.
pub fn write_all(out_dir: &Path, rows: &[ResultRow]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let ok_rows: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.status == "ok" && r.error.is_some())
        .collect();
    let plot_dir = out_dir.join("plots");
    std::fs::create_dir_all(&plot_dir)?;

    for (axis, accessor) in axes() {
        let mut values: Vec<f64> = ok_rows.iter().filter_map(|r| accessor(r)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.len() < 2 {
            continue;
        }
        // (axis value, method, param) → (sum, sumsq, count)
        let mut groups: BTreeMap<(String, String, String), (f64, f64, usize)> = BTreeMap::new();
        for r in &ok_rows {
            let Some(v) = accessor(r) else { continue };
            let key = (format!("{v}"), r.method.clone(), r.param_name.clone());
            let e = groups.entry(key).or_insert((0.0, 0.0, 0));
            let err = r.error.unwrap();
            e.0 += err;
            e.1 += err * err;
            e.2 += 1;
        }
        let csv_path = out_dir.join(format!("plot_error_vs_{axis}.csv"));
        let mut text = format!("{axis},method,param_name,mean_error,stderr,count\n");
        let mut series: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
        for ((v, method, param), (sum, sumsq, count)) in &groups {
            let n = *count as f64;
            let mean = sum / n;
            let var = (sumsq / n - mean * mean).max(0.0);
            let se = if *count > 1 { (var / (n - 1.0)).sqrt() } else { 0.0 };
            writeln!(text, "{v},{method},{param},{mean},{se},{count}").expect("string write");
            series
                .entry((method.clone(), param.clone()))
                .or_default()
                .push((v.parse().unwrap_or(f64::NAN), mean));
        }
        std::fs::write(&csv_path, text)?;
        written.push(csv_path);

        let svg_path = plot_dir.join(format!("error_vs_{axis}.svg"));
        std::fs::write(&svg_path, line_plot_svg(axis, "mean error", &series))?;
        written.push(svg_path);
    }

    // Scatter: truth vs estimate.
    let mut text = String::from("method,param_name,truth,estimate\n");
    let mut points: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &ok_rows {
        if let (Some(t), Some(e)) = (r.truth, r.estimate) {
            writeln!(text, "{},{},{t},{e}", r.method, r.param_name).expect("string write");
            points.entry(r.method.clone()).or_default().push((t, e));
        }
    }
    let scatter_csv = out_dir.join("plot_scatter.csv");
    std::fs::write(&scatter_csv, text)?;
    written.push(scatter_csv);
    if !points.is_empty() {
        let svg_path = plot_dir.join("scatter_truth_vs_estimate.svg");
        std::fs::write(&svg_path, scatter_svg(&points))?;
        written.push(svg_path);
    }
    Ok(written)
}

struct Frame {
    w: f64,
    h: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Self {
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in xs {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in ys {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if !x_min.is_finite() {
            (x_min, x_max) = (0.0, 1.0);
        }
        if !y_min.is_finite() {
            (y_min, y_max) = (0.0, 1.0);
        }
        if (x_max - x_min).abs() < 1e-12 {
            x_max = x_min + 1.0;
        }
        if (y_max - y_min).abs() < 1e-12 {
            y_max = y_min + 1.0;
        }
        Frame {
            w: 640.0,
            h: 480.0,
            margin: 56.0,
            x_range: (x_min, x_max),
            y_range: (y_min, y_max),
        }
    }

    fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (v - lo) / (hi - lo) * (self.w - 2.0 * self.margin)
    }

    fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.h - self.margin - (v - lo) / (hi - lo) * (self.h - 2.0 * self.margin)
    }

    fn open(&self, x_label: &str, y_label: &str) -> String {
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            self.w, self.h
        );
        let m = self.margin;
        let _ = writeln!(
            s,
            "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>",
            self.w, self.h
        );
        let _ = writeln!(
            s,
            "<line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
            self.h - m,
            self.w - m,
            self.h - m
        );
        let _ = writeln!(
            s,
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>",
            self.h - m
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            self.w / 2.0,
            self.h - 12.0,
            xml(x_label)
        );
        let _ = writeln!(
            s,
            "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
            self.h / 2.0,
            self.h / 2.0,
            xml(y_label)
        );
        for frac in [0.0, 0.5, 1.0] {
            let xv = self.x_range.0 + frac * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + frac * (self.y_range.1 - self.y_range.0);
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>",
                self.x(xv),
                self.h - m + 16.0,
                xv
            );
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text>",
                m - 6.0,
                self.y(yv) + 4.0,
                yv
            );
        }
        s
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn line_plot_svg(
    x_label: &str,
    y_label: &str,
    series: &BTreeMap<(String, String), Vec<(f64, f64)>>,
) -> String {
    let frame = Frame::new(
        series.values().flatten().map(|p| p.0),
        series.values().flatten().map(|p| p.1),
    );
    let mut s = frame.open(x_label, y_label);
    for (i, ((method, param), pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", frame.x(*x), frame.y(*y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                frame.x(*x),
                frame.y(*y)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            frame.w - frame.margin + 4.0 - 120.0,
            frame.margin + 14.0 * i as f64,
            xml(&format!("{method}/{param}"))
        );
    }
    s.push_str("</svg>\n");
    s
}

fn scatter_svg(points: &BTreeMap<String, Vec<(f64, f64)>>) -> String {
    let frame = Frame::new(
        points.values().flatten().map(|p| p.0),
        points.values().flatten().map(|p| p.1),
    );
    let mut s = frame.open("truth", "estimate");
    // Identity diagonal over the shared range.
    let lo = frame.x_range.0.min(frame.y_range.0);
    let hi = frame.x_range.1.max(frame.y_range.1);
    let _ = writeln!(
        s,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
        frame.x(lo),
        frame.y(lo),
        frame.x(hi),
        frame.y(hi)
    );
    for (i, (method, pts)) in points.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for (t, e) in pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.6\"/>",
                frame.x(*t),
                frame.y(*e)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            frame.w - frame.margin - 80.0,
            frame.margin + 14.0 * i as f64,
            xml(method)
        );
    }
    s.push_str("</svg>\n");
    s
}
