//! Minimal log-plot: axes, points with error bars, a reference curve.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    /// (t, E, stderr)
    pub points: Vec<(f64, f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// ln E against t. Non-positive values are skipped. `reference` is drawn as a
/// dashed polyline of (t, ln E) pairs.
pub fn log_plot(title: &str, series: &[Series], reference: Option<(&str, &[(f64, f64)])>) -> String {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in series {
        for &(t, e, se) in &s.points {
            if e > 0.0 {
                pts.push((t, e.ln()));
                if e - se > 0.0 {
                    pts.push((t, (e - se).ln()));
                }
                pts.push((t, (e + se).ln()));
            }
        }
    }
    if let Some((_, r)) = reference {
        pts.extend(r.iter().copied().filter(|p| p.1.is_finite()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let (l, r, b, t) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{l},{t} L{l},{b} L{r},{b}" stroke="black" fill="none"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" font-size="11" text-anchor="middle">{:.3}</text>"#, px(xv), b + 16.0, xv);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">{:.3}</text>"#, l - 6.0, py(yv) + 4.0, yv);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t</text>"#, W / 2.0, H - 18.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">ln E|u|²</text>"#, H / 2.0, H / 2.0);

    if let Some((label, r)) = reference {
        let d: Vec<String> = r
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if d.len() > 1 {
            let _ = writeln!(s, r#"<polyline points="{}" stroke="gray" stroke-dasharray="6,4" fill="none"/>"#, d.join(" "));
            let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" fill="gray">{}</text>"#, r_text_x(), t + 14.0, escape(label));
        }
    }
    for (i, ser) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        for &(tt, e, se) in &ser.points {
            if !(e > 0.0) {
                continue;
            }
            let lo = if e - se > 0.0 { (e - se).ln() } else { y0 };
            let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{c}"/>"#, px(tt), py(lo), py((e + se).ln()));
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, px(tt), py(e.ln()));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" fill="{c}">{}</text>"#, l + 8.0, t + 14.0 + 14.0 * i as f64, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn r_text_x() -> f64 {
    W - MARGIN - 150.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed() {
        let s = log_plot(
            "a<b",
            &[Series { label: "chaos".into(), points: vec![(0.5, 1.2, 0.01), (1.0, 2.0, 0.1)] }],
            Some(("ref", &[(0.5, 0.1), (1.0, 0.7)])),
        );
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("a&lt;b"));
        assert!(s.contains("polyline"));
    }

    #[test]
    fn empty_and_degenerate() {
        let s = log_plot("", &[Series { label: "x".into(), points: vec![(1.0, 0.0, 0.0)] }], None);
        assert_eq!(s.matches("<circle").count(), 0);
        let s = log_plot("", &[Series { label: "x".into(), points: vec![(1.0, 1.0, 0.0)] }], None);
        assert_eq!(s.matches("<circle").count(), 1);
        assert!(!s.contains("NaN"));
    }
}
