//! Minimal SVG output: scatter plots and line charts, nothing more.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 50.0;

pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub log: bool,
}

impl Axis {
    fn map(&self, v: f64, lo: f64, hi: f64) -> f64 {
        let (a, b, x) = if self.log {
            (self.min.log10(), self.max.log10(), v.max(self.min).log10())
        } else {
            (self.min, self.max, v)
        };
        lo + (x - a) / (b - a) * (hi - lo)
    }

    /// Bounds covering `values` (positive ones only on a log axis).
    pub fn fit(label: &str, values: impl IntoIterator<Item = f64>, log: bool) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            if v.is_finite() && (!log || v > 0.0) {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if !min.is_finite() {
            (min, max) = (1e-3, 1.0);
        }
        if max <= min {
            max = min * 2.0 + 1e-12;
        }
        if log {
            (min, max) = (min / 1.5, max * 1.5);
        } else {
            let pad = 0.05 * (max - min);
            (min, max) = (min - pad, max + pad);
        }
        Self {
            label: label.to_string(),
            min,
            max,
            log,
        }
    }
}

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
}

pub fn render(title: &str, x: &Axis, y: &Axis, series: &[Series], identity: bool) -> String {
    let px = |v: f64| x.map(v, MARGIN, W - 10.0);
    let py = |v: f64| y.map(v, H - MARGIN, 20.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, W - 10.0, H - MARGIN, 20.0);
    let _ = writeln!(s, r#"<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>"#);
    for (v, anchor) in [(x.min, "start"), (x.max, "end")] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{}</text>"#, px(v), y0 + 14.0, fmt(v));
    }
    for v in [y.min, y.max] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 4.0, py(v) + 4.0, fmt(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(&x.label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&y.label)
    );
    if identity {
        let lo = x.min.max(y.min);
        let hi = x.max.min(y.max);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="red"/>"#,
            px(lo),
            py(lo),
            px(hi),
            py(hi)
        );
    }
    for (k, ser) in series.iter().enumerate() {
        if ser.line {
            let pts: Vec<String> = ser.points.iter().map(|&(a, b)| format!("{:.1},{:.1}", px(a), py(b))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}"/>"#, pts.join(" "), ser.color);
        } else {
            for &(a, b) in &ser.points {
                let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}"/>"#, px(a), py(b), ser.color);
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{}">{}</text>"#,
            x0 + 10.0,
            y1 + 14.0 * (k as f64 + 1.0),
            ser.color,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let x = Axis::fit("theory", [0.01, 0.5], true);
        let y = Axis::fit("simulation", [0.02, 0.4], true);
        let svg = render(
            "a <b>",
            &x,
            &y,
            &[Series {
                name: "n=6".into(),
                color: "blue",
                points: vec![(0.01, 0.02), (0.5, 0.4)],
                line: false,
            }],
            true,
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("a &lt;b&gt;"));
    }
}
