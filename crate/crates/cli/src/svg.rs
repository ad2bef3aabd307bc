//! Plain SVG text: 2D scatter plots and line charts.

use std::fmt::Write as _;

use riesz_core::{Configuration, Points};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn to_px(&self, v: f64, flip: bool) -> f64 {
        let t = (v - self.lo) / (self.hi - self.lo);
        let t = if flip { 1.0 - t } else { t };
        MARGIN + t * (SIZE - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    )
    .unwrap();
    let (a, b) = (MARGIN, SIZE - MARGIN);
    writeln!(
        out,
        r##"<rect x="{a}" y="{a}" width="{w}" height="{w}" fill="none" stroke="#999"/>"##,
        w = b - a
    )
    .unwrap();
}

fn tick_labels(out: &mut String, x: &Axis, y: &Axis, xlabel: &str, ylabel: &str) {
    let (a, b) = (MARGIN, SIZE - MARGIN);
    for (v, anchor, px) in [(x.lo, "start", a), (x.hi, "end", b)] {
        writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="{anchor}">{v:.4}</text>"#,
            b + 14.0
        )
        .unwrap();
    }
    for (v, py) in [(y.lo, b), (y.hi, a + 10.0)] {
        writeln!(
            out,
            r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{v:.4}</text>"#,
            a - 4.0
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        SIZE - 12.0,
        escape(xlabel)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        SIZE / 2.0,
        SIZE / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of a 2D configuration, one color per label.
pub fn scatter(cfg: &Configuration, labels: &[usize], title: &str) -> String {
    assert_eq!(cfg.dim(), 2);
    let x = Axis::fit(cfg.points().map(|p| p[0]));
    let y = Axis::fit(cfg.points().map(|p| p[1]));
    // equal scales on both axes
    let half = 0.5 * (x.hi - x.lo).max(y.hi - y.lo);
    let (cx, cy) = (0.5 * (x.lo + x.hi), 0.5 * (y.lo + y.hi));
    let x = Axis {
        lo: cx - half,
        hi: cx + half,
    };
    let y = Axis {
        lo: cy - half,
        hi: cy + half,
    };
    let mut out = String::new();
    header(&mut out, title);
    for (p, &l) in cfg.points().zip(labels) {
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
            x.to_px(p[0], false),
            y.to_px(p[1], true),
            PALETTE[l % PALETTE.len()]
        )
        .unwrap();
    }
    tick_labels(&mut out, &x, &y, "x", "y");
    out.push_str("</svg>\n");
    out
}

/// Line chart of one or more `(label, points)` series; x on a log scale.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let x = Axis::fit(series.iter().flat_map(|s| s.1.iter().map(|p| p.0.log10())));
    let y = Axis::fit(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut out = String::new();
    header(&mut out, title);
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", x.to_px(p.0.log10(), false), y.to_px(p.1, true)))
            .collect();
        writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        )
        .unwrap();
        for p in &path {
            let (px, py) = p.split_once(',').unwrap();
            writeln!(out, r#"<circle cx="{px}" cy="{py}" r="2.5" fill="{color}"/>"#).unwrap();
        }
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            MARGIN + 6.0,
            MARGIN + 14.0 * (k + 1) as f64,
            escape(label)
        )
        .unwrap();
    }
    tick_labels(&mut out, &x, &y, &format!("log10 {xlabel}"), ylabel);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_has_one_circle_per_point() {
        let cfg = Configuration::new(2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 0.5]).unwrap();
        let s = scatter(&cfg, &[0, 0, 1], "t");
        assert_eq!(s.matches("<circle").count(), 3);
        assert!(s.contains(PALETTE[1]));
        assert!(s.ends_with("</svg>\n"));
    }

    #[test]
    fn chart_skips_non_finite_points() {
        let s = line_chart(
            "e",
            "n",
            "E",
            &[("a", vec![(1.0, 0.0), (10.0, f64::NAN), (100.0, 1.0)])],
        );
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
