//! Artifact writers: trajectory CSV, table CSV, and self-contained SVG plots.

use std::fmt::Write as _;
use std::io::{self, Write};

use esdelay::estimator::{Observer, StepView};
use esdelay::feasibility::TableRow;

/// `j, theta_hat_1..n, theta_1..n, y, eta, alpha, err`.
pub fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["j".to_string()];
    cols.extend((1..=n).map(|i| format!("theta_hat_{i}")));
    cols.extend((1..=n).map(|i| format!("theta_{i}")));
    cols.extend(["y", "eta", "alpha", "err"].map(String::from));
    cols.join(",")
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_row(s: &StepView<'_>) -> String {
    let mut line = s.j.to_string();
    for v in s.theta_hat.iter().chain(s.theta).chain([s.y, s.eta, s.alpha, s.err].iter()) {
        line.push(',');
        line.push_str(&num(*v));
    }
    line
}

/// Streams every `decimation`-th step to `out`. The first write error is
/// kept and later rows are dropped.
pub struct CsvSink<W: Write> {
    out: W,
    decimation: u64,
    error: Option<io::Error>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, n: usize, decimation: u64) -> io::Result<Self> {
        writeln!(out, "{}", trajectory_header(n))?;
        Ok(Self { out, decimation: decimation.max(1), error: None })
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Observer for CsvSink<W> {
    fn observe(&mut self, s: &StepView<'_>) {
        if self.error.is_some() || s.j % self.decimation != 0 {
            return;
        }
        if let Err(e) = writeln!(self.out, "{}", trajectory_row(s)) {
            self.error = Some(e);
        }
    }
}

/// Parsed trajectory CSV: column names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Read a trajectory CSV back, checking the header against the schema.
pub fn read_trajectory_csv(text: &str) -> Result<TrajectoryTable, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let columns: Vec<String> = header.split(',').map(String::from).collect();
    if columns.len() < 7 || (columns.len() - 5) % 2 != 0 {
        return Err(format!("unexpected column count {}", columns.len()));
    }
    let n = (columns.len() - 5) / 2;
    if header != trajectory_header(n) {
        return Err(format!("header does not match the schema for n = {n}"));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row: Vec<f64> = line.split(',').map(str::parse).collect::<Result<_, _>>().map_err(|e| format!("row {}: {e}", k + 1))?;
        if row.len() != columns.len() {
            return Err(format!("row {} has {} fields", k + 1, row.len()));
        }
        rows.push(row);
    }
    Ok(TrajectoryTable { columns, rows })
}

/// Keeps the largest error of every `stride` steps for plotting.
pub struct PlotSampler {
    stride: u64,
    pub points: Vec<(f64, f64)>,
}

impl PlotSampler {
    /// About `target` points over `horizon` steps.
    pub fn new(horizon: u64, target: u64) -> Self {
        Self { stride: (horizon / target.max(1)).max(1), points: Vec::new() }
    }
}

impl Observer for PlotSampler {
    fn observe(&mut self, s: &StepView<'_>) {
        if s.j % self.stride == 0 {
            self.points.push((s.j as f64, s.err));
        } else if let Some(last) = self.points.last_mut() {
            last.1 = last.1.max(s.err);
        }
    }
}

/// Forwards each step to two observers.
pub struct Tee<'a, A, B>(pub &'a mut A, pub &'a mut B);

impl<A: Observer, B: Observer> Observer for Tee<'_, A, B> {
    fn observe(&mut self, s: &StepView<'_>) {
        self.0.observe(s);
        self.1.observe(s);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot with a log₁₀ y axis. Nonpositive values are clipped to the
/// smallest positive value present.
pub fn svg_log_plot(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let (w, h) = (760.0, 480.0);
    let (left, right, top, bottom) = (80.0, 20.0, 40.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let all = || series.iter().flat_map(|s| s.points.iter());
    let x_max = nice_ceil(all().map(|p| p.0).fold(0.0f64, f64::max).max(1.0));
    let pos_min = all().map(|p| p.1).filter(|v| *v > 0.0 && v.is_finite()).fold(f64::INFINITY, f64::min);
    let pos_max = all().map(|p| p.1).filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    let (lo, hi) = if pos_min.is_finite() && pos_max > 0.0 {
        (pos_min.log10().floor(), pos_max.log10().ceil().max(pos_min.log10().floor() + 1.0))
    } else {
        (-1.0, 0.0)
    };
    let floor = 10f64.powf(lo);
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |v: f64| top + ph * (hi - v.max(floor).log10()) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, xml_escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    let decades = (hi - lo) as i64;
    let step = (decades / 10).max(1);
    let mut d = lo as i64;
    while d <= hi as i64 {
        let y = sy(10f64.powi(d as i32));
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0);
        d += step;
    }
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let x = sx(xv);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, top + ph + 20.0, tick_label(xv));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 15.0, xml_escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        xml_escape(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().filter(|p| p.1.is_finite()).map(|&(x, v)| format!("{:.2},{:.2}", sx(x), sy(v))).collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = top + 18.0 + 18.0 * k as f64;
        let lx = left + pw - 250.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 24.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, xml_escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Smallest of `{1, 2, 5} × 10ᵏ` not below `x`.
fn nice_ceil(x: f64) -> f64 {
    let p = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * p).find(|v| *v >= x * (1.0 - 1e-12)).unwrap_or(10.0 * p)
}

fn tick_label(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x < 1e5 && x.fract() == 0.0 {
        format!("{x}")
    } else {
        format!("{x:.1e}")
    }
}

pub const TABLE_COLUMNS: &str = "variant,D_M,sigma,epsilon_star,decay_rate,method";

/// Machine CSV; simulation rows leave `sigma` empty.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = format!("{TABLE_COLUMNS}\n");
    for r in rows {
        let sigma = r.sigma.map(num).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{},{}", r.variant, r.d_max, sigma, num(r.epsilon_star), num(r.decay_rate), r.method.name());
    }
    s
}

/// Aligned text rendering of the same rows.
pub fn table_text(rows: &[TableRow]) -> String {
    let mut s = format!("{:<10} {:>5} {:>7} {:>12} {:>20} {:<10}\n", "variant", "D_M", "sigma", "epsilon*", "decay rate", "method");
    for r in rows {
        let sigma = r.sigma.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<10} {:>5} {:>7} {:>12.3e} {:>20.15} {:<10}",
            r.variant.to_string(),
            r.d_max,
            sigma,
            r.epsilon_star,
            r.decay_rate,
            r.method.name()
        );
    }
    s
}
