//! Static SVG line charts. Output depends only on the record, so re-plotting
//! gives byte-identical files.

use std::fmt::Write;

use crate::config::Experiment;
use crate::record::{RunRecord, Table};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        Some(Axis { lo, hi, log })
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..5)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                if self.log {
                    10f64.powf(t)
                } else {
                    t
                }
            })
            .collect()
    }
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-2..1e4).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    fn usable(&self, p: &(f64, f64)) -> bool {
        p.0.is_finite() && p.1.is_finite() && (!self.log_x || p.0 > 0.0) && (!self.log_y || p.1 > 0.0)
    }

    pub fn to_svg(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter()).filter(|p| self.usable(p));
        let xa = Axis::fit(pts().map(|p| p.0), self.log_x);
        let ya = Axis::fit(pts().map(|p| p.1), self.log_y);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let x_scale = if self.log_x { " (log)" } else { "" };
        let y_scale = if self.log_y { " (log)" } else { "" };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label),
            x_scale
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label),
            y_scale
        );
        if let (Some(xa), Some(ya)) = (xa, ya) {
            let px = |x: f64| LEFT + xa.frac(x) * pw;
            let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;
            for t in xa.ticks() {
                let x = px(t);
                let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
                let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
            }
            for t in ya.ticks() {
                let y = py(t);
                let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
                let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(t));
            }
            for (i, series) in self.series.iter().enumerate() {
                let color = COLORS[i % COLORS.len()];
                let coords: Vec<String> =
                    series.points.iter().filter(|p| self.usable(p)).map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, coords.join(" "));
                let ly = TOP + 15.0 + 18.0 * i as f64;
                let lx = WIDTH - RIGHT + 10.0;
                let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/>"#, lx + 20.0);
                let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 25.0, ly + 4.0, escape(&series.name));
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn series(t: &Table, x: &str, y: &str, name: &str, dashed: bool) -> Option<Series> {
    let xs = t.column(x)?;
    let ys = t.column(y)?;
    Some(Series { name: name.into(), points: xs.into_iter().zip(ys).collect(), dashed })
}

/// `y` scaled so its mean matches `reference` in log space.
fn fitted(t: &Table, x: &str, reference: &str, y: &str, name: &str) -> Option<Series> {
    let r = t.column(reference)?;
    let v = t.column(y)?;
    let logs: Vec<f64> = r.iter().zip(&v).map(|(a, b)| (a / b).ln()).filter(|l| l.is_finite()).collect();
    if logs.is_empty() {
        return None;
    }
    let c = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    let mut s = series(t, x, y, name, true)?;
    for p in &mut s.points {
        p.1 *= c;
    }
    Some(s)
}

fn split_by_n(t: &Table, x: &str, y: &str, prefix: &str, dashed: bool) -> Vec<Series> {
    let (Some(ns), Some(xs), Some(ys)) = (t.column("n"), t.column(x), t.column(y)) else {
        return vec![];
    };
    let mut out: Vec<Series> = Vec::new();
    for i in 0..ns.len() {
        if i == 0 || ns[i] != ns[i - 1] {
            out.push(Series { name: format!("{prefix} n={}", label(ns[i])), points: vec![], dashed });
        }
        out.last_mut().unwrap().points.push((xs[i], ys[i]));
    }
    out
}

/// Charts for a record as `(file name, svg)`. Records with fewer than two
/// n-grid points produce nothing.
pub fn emit_plots(record: &RunRecord) -> Vec<(String, String)> {
    let cfg = &record.config;
    let p = &cfg.params;
    let windows = cfg.windows().map(|w| w.len()).unwrap_or(0);
    if windows < 2 {
        return vec![];
    }
    let process = p.process.clone().unwrap_or_default();
    let pair = match &p.target {
        Some(t) => format!("{process} vs {t}"),
        None => process,
    };
    let title = format!("{}: {} d={} (seed {}, {} replicas)", cfg.experiment.name(), pair, p.d, cfg.seed, cfg.replicas);
    let chart = |x_label: &str, y_label: &str, log_x: bool, log_y: bool, series: Vec<Option<Series>>| Chart {
        title: title.clone(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_x,
        log_y,
        series: series.into_iter().flatten().collect(),
    };
    let mut out = Vec::new();
    match cfg.experiment {
        Experiment::Rates => {
            if let Some(t) = record.table("rates") {
                let c = chart(
                    "n",
                    "W2^2 cost on the window",
                    true,
                    true,
                    vec![
                        series(t, "n", "W2sq_mean", "measured", false),
                        fitted(t, "n", "W2sq_mean", "alpha2", "c * alpha2"),
                        fitted(t, "n", "W2sq_mean", "alpha2_hu", "c * alpha2_hu"),
                    ],
                );
                out.push(("rates.svg".to_string(), c.to_svg()));
            }
        }
        Experiment::Spectrum => {
            if let Some(t) = record.table("spectrum") {
                let mut s: Vec<Option<Series>> = split_by_n(t, "k_norm", "mean", "measured", false).into_iter().map(Some).collect();
                s.extend(split_by_n(t, "k_norm", "predicted", "predicted", true).into_iter().map(Some));
                out.push(("spectrum.svg".to_string(), chart("|k|", "mean (vol/N) S_n(k)", false, false, s).to_svg()));
            }
        }
        Experiment::Variance => {
            if let Some(t) = record.table("variance") {
                let c = chart(
                    "n",
                    "sigma(n) = Var N / volume",
                    true,
                    false,
                    vec![series(t, "n", "sigma", "measured", false), series(t, "n", "predicted_sigma", "predicted", true)],
                );
                out.push(("variance.svg".to_string(), c.to_svg()));
            }
        }
        Experiment::Tails => {
            if let Some(t) = record.table("tails_cdf") {
                let mut s: Vec<Option<Series>> = split_by_n(t, "r", "tail", "P(X >= r)", false).into_iter().map(Some).collect();
                s.extend(split_by_n(t, "r", "bound", "bound", true).into_iter().map(Some));
                out.push(("tails.svg".to_string(), chart("r", "tail probability", true, true, s).to_svg()));
            }
        }
        Experiment::BlCheck => {
            if let Some(t) = record.table("bl_check") {
                let c = chart(
                    "n",
                    "W2^2 on the unit torus",
                    true,
                    true,
                    vec![series(t, "n", "measured_mean", "measured", false), fitted(t, "n", "measured_mean", "bound_w2_mean", "c * bound")],
                );
                out.push(("bl_check.svg".to_string(), c.to_svg()));
            }
        }
        Experiment::MatchingMoments => {
            if let Some(t) = record.table("matching_moments") {
                let c = chart(
                    "n",
                    "total matching cost",
                    true,
                    true,
                    vec![
                        series(t, "n", "exact_mean", "exact", false),
                        series(t, "n", "stable_mean", "stable", false),
                        series(t, "n", "canonical_mean", "canonical", true),
                    ],
                );
                out.push(("matching_moments.svg".to_string(), c.to_svg()));
            }
        }
    }
    out
}
