//! Minimal deterministic SVG charts: scatter with an optional line overlay,
//! and a plain line chart. Coordinates are printed with fixed precision so
//! identical inputs give identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 64.0;

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// Small print under the x label.
    pub caption: Option<&'a str>,
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn covering(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Self { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = lo.abs().max(1.0) * 0.5;
            return Self {
                lo: lo - pad,
                hi: hi + pad,
            };
        }
        let pad = (hi - lo) * 0.05;
        Self {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    /// Tick positions at 1, 2 or 5 times a power of ten.
    fn ticks(&self) -> (Vec<f64>, usize) {
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        ((first..=last).map(|k| k as f64 * step).collect(), decimals)
    }
}

struct Frame {
    x: Axis,
    y: Axis,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.lo) / (self.x.hi - self.x.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.lo) / (self.y.hi - self.y.lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick_label(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        format!("{:.decimals$}", 0.0)
    } else {
        s
    }
}

fn open(chart: &Chart, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(chart.title)
    );
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        x1 - x0,
        y1 - y0
    );
    let (xt, xd) = frame.x.ticks();
    for t in xt {
        let px = frame.px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{y1:.1}" x2="{px:.2}" y2="{:.1}" stroke="#444"/><text x="{px:.2}" y="{:.1}" text-anchor="middle">{}</text>"##,
            y1 + 5.0,
            y1 + 18.0,
            tick_label(t, xd)
        );
    }
    let (yt, yd) = frame.y.ticks();
    for t in yt {
        let py = frame.py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{py:.2}" x2="{x0:.1}" y2="{py:.2}" stroke="#444"/><text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick_label(t, yd)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        y1 + 36.0,
        escape(chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(chart.y_label)
    );
    if let Some(caption) = chart.caption {
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10" fill="#666">{}</text>"##,
            (x0 + x1) / 2.0,
            HEIGHT - 8.0,
            escape(caption)
        );
    }
    s
}

fn polyline(s: &mut String, frame: &Frame, line: &[(f64, f64)], color: &str) {
    let pts: Vec<String> = line
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
        pts.join(" ")
    );
}

pub fn scatter(chart: &Chart, points: &[(f64, f64)], overlay: Option<&[(f64, f64)]>) -> String {
    let all = points.iter().chain(overlay.unwrap_or(&[]));
    let frame = Frame {
        x: Axis::covering(all.clone().map(|p| p.0)),
        y: Axis::covering(all.map(|p| p.1)),
    };
    let mut s = open(chart, &frame);
    s.push_str("<g fill=\"#1f77b4\" fill-opacity=\"0.45\">\n");
    for &(x, y) in points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
    {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.2"/>"#,
            frame.px(x),
            frame.py(y)
        );
    }
    s.push_str("</g>\n");
    if let Some(line) = overlay {
        polyline(&mut s, &frame, line, "#d62728");
    }
    s.push_str("</svg>\n");
    s
}

pub fn line(chart: &Chart, line: &[(f64, f64)]) -> String {
    let frame = Frame {
        x: Axis::covering(line.iter().map(|p| p.0)),
        y: Axis::covering(line.iter().map(|p| p.1)),
    };
    let mut s = open(chart, &frame);
    polyline(&mut s, &frame, line, "#1f77b4");
    s.push_str("</svg>\n");
    s
}
