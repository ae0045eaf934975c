//! Minimal self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round tick positions covering `[lo, hi]`, all inside the range.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// How a series is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    /// Horizontal-then-vertical steps, for empirical CDFs.
    Step,
    Points,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

/// An x/y chart. The x axis spans exactly the given range, or the data's
/// range when none is given.
#[derive(Debug, Clone, Default)]
pub struct XyChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

fn data_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn widen(r: (f64, f64)) -> (f64, f64) {
    if r.1 > r.0 {
        r
    } else {
        let pad = if r.0 == 0.0 { 1.0 } else { r.0.abs() * 0.1 };
        (r.0 - pad, r.1 + pad)
    }
}

impl XyChart {
    pub fn x_span(&self) -> (f64, f64) {
        self.x_range
            .unwrap_or_else(|| data_range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0))))
    }

    pub fn render(&self) -> String {
        let (x0, x1) = self.x_span();
        let xr = widen((x0, x1));
        let yr = widen(self.y_range.unwrap_or_else(|| {
            let (lo, hi) = data_range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
            let pad = (hi - lo) * 0.05;
            (lo - pad, hi + pad)
        }));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
        let sy = |y: f64| TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;

        let mut s = header(&format!(" data-x-min=\"{x0}\" data-x-max=\"{x1}\""));
        title(&mut s, &self.title);
        axes(&mut s, &self.x_label, &self.y_label, pw, ph);
        for t in ticks(xr.0, xr.1, 6) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{b2:.2}" stroke="black"/><text x="{x:.2}" y="{ty:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                fmt_tick(t),
                b = TOP + ph,
                b2 = TOP + ph + 5.0,
                ty = TOP + ph + 18.0
            );
        }
        for t in ticks(yr.0, yr.1, 6) {
            let y = sy(t);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{r:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{tx:.2}" y="{ty:.2}" font-size="11" text-anchor="end">{}</text>"##,
                fmt_tick(t),
                r = LEFT + pw,
                tx = LEFT - 6.0,
                ty = y + 4.0
            );
        }
        for (i, ser) in self.series.iter().enumerate() {
            let c = color(i);
            let pts: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| (sx(x), sy(y)))
                .collect();
            match ser.style {
                Style::Points => {
                    for (x, y) in &pts {
                        let _ = writeln!(s, r#"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="4" fill="{c}"/>"#);
                    }
                }
                Style::Line | Style::Step => {
                    let mut d = String::new();
                    for (k, &(x, y)) in pts.iter().enumerate() {
                        if k == 0 {
                            let _ = write!(d, "M{x:.2},{y:.2}");
                        } else if ser.style == Style::Step {
                            let _ = write!(d, " H{x:.2} V{y:.2}");
                        } else {
                            let _ = write!(d, " L{x:.2},{y:.2}");
                        }
                    }
                    let _ = writeln!(s, r#"<path class="series" d="{d}" fill="none" stroke="{c}" stroke-width="1.8"/>"#);
                }
            }
            legend(&mut s, i, &ser.name, c);
        }
        s.push_str("</svg>\n");
        s
    }
}

/// One panel per metric, one bar per group inside each panel.
#[derive(Debug, Clone, Default)]
pub struct BarPanels {
    pub title: String,
    pub groups: Vec<String>,
    /// `(metric, value per group)`.
    pub metrics: Vec<(String, Vec<f64>)>,
}

impl BarPanels {
    pub fn render(&self) -> String {
        let n = self.metrics.len().max(1) as f64;
        let pw = (W - LEFT - RIGHT + 100.0) / n;
        let ph = H - TOP - BOTTOM;
        let mut s = header("");
        title(&mut s, &self.title);
        for (m, (metric, vals)) in self.metrics.iter().enumerate() {
            let x0 = 30.0 + m as f64 * pw;
            let hi = vals.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
            let hi = if hi > 0.0 { hi * 1.1 } else { 1.0 };
            let _ = writeln!(
                s,
                r#"<line x1="{x0:.2}" y1="{b:.2}" x2="{x1:.2}" y2="{b:.2}" stroke="black"/><text x="{cx:.2}" y="{ty:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                esc(metric),
                b = TOP + ph,
                x1 = x0 + pw - 15.0,
                cx = x0 + (pw - 15.0) / 2.0,
                ty = TOP + ph + 18.0
            );
            let bw = (pw - 25.0) / vals.len().max(1) as f64;
            for (g, &v) in vals.iter().enumerate() {
                let v = if v.is_finite() { v.max(0.0) } else { 0.0 };
                let h = v / hi * ph;
                let _ = writeln!(
                    s,
                    r#"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{c}"><title>{}: {v:.4}</title></rect><text x="{tx:.2}" y="{vy:.2}" font-size="9" text-anchor="middle">{}</text>"#,
                    esc(self.groups.get(g).map(String::as_str).unwrap_or("")),
                    fmt_tick(v),
                    x = x0 + 5.0 + g as f64 * bw,
                    y = TOP + ph - h,
                    w = bw * 0.85,
                    c = color(g),
                    tx = x0 + 5.0 + g as f64 * bw + bw * 0.425,
                    vy = TOP + ph - h - 3.0
                );
            }
        }
        for (g, name) in self.groups.iter().enumerate() {
            legend(&mut s, g, name, color(g));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn header(extra: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\"{extra}>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn title(s: &mut String, t: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="22" font-size="15" text-anchor="middle">{}</text>"#,
        esc(t),
        x = W / 2.0
    );
}

fn axes(s: &mut String, xl: &str, yl: &str, pw: f64, ph: f64) {
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{x:.2}" y="{y:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        esc(xl),
        x = LEFT + pw / 2.0,
        y = H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {y:.2})">{}</text>"#,
        esc(yl),
        y = TOP + ph / 2.0
    );
}

fn legend(s: &mut String, i: usize, name: &str, c: &str) {
    let y = TOP + 10.0 + i as f64 * 18.0;
    let x = W - RIGHT + 15.0;
    let _ = writeln!(
        s,
        r#"<rect x="{x}" y="{ry}" width="12" height="12" fill="{c}"/><text x="{tx}" y="{ty}" font-size="11">{}</text>"#,
        esc(name),
        ry = y - 10.0,
        tx = x + 18.0,
        ty = y
    );
}
