//! Minimal static SVG charts.

use std::fmt::Write;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 36.0;
const PAD_B: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn axis(v: f64, log: bool) -> Option<f64> {
    match log {
        true if v > 0.0 && v.is_finite() => Some(v.log10()),
        true => None,
        false if v.is_finite() => Some(v),
        false => None,
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else {
        format!("{v:.3}")
    }
}

fn panel(out: &mut String, p: &Panel, x0: f64) {
    let pts = |s: &Series| {
        s.points
            .iter()
            .filter_map(|&(x, y)| Some((axis(x, p.log_x)?, axis(y, p.log_y)?)))
            .collect::<Vec<_>>()
    };
    let all: Vec<(f64, f64)> = p.series.iter().flat_map(pts).collect();
    let (xl, xh) = range(all.iter().map(|q| q.0));
    let (yl, yh) = range(all.iter().map(|q| q.1));
    let sx = |x: f64| x0 + PAD_L + (x - xl) / (xh - xl) * (W - PAD_L - PAD_R);
    let sy = |y: f64| PAD_T + (yh - y) / (yh - yl) * (H - PAD_T - PAD_B);
    let _ = writeln!(out, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, x0 + W / 2.0, p.title);
    let _ = writeln!(
        out,
        r#"<rect x="{:.1}" y="{PAD_T}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x0 + PAD_L,
        W - PAD_L - PAD_R,
        H - PAD_T - PAD_B
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (xl + f * (xh - xl), yl + f * (yh - yl));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            sx(xv),
            H - PAD_B + 14.0,
            tick(xv, p.log_x)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            x0 + PAD_L - 4.0,
            sy(yv) + 3.0,
            tick(yv, p.log_y)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#, x0 + W / 2.0, H - 12.0, p.x_label);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 + 16.0,
        H / 2.0,
        x0 + 16.0,
        H / 2.0,
        p.y_label
    );
    for (i, s) in p.series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let q = pts(s);
        if s.markers {
            for (x, y) in &q {
                let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, sx(*x), sy(*y));
            }
        } else if !q.is_empty() {
            let path: Vec<String> = q.iter().map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y))).collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{}"/>"#, path.join(" "));
        }
        let ly = PAD_T + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" font-size="10" fill="{c}">{}</text>"#,
            x0 + W - PAD_R - 6.0,
            s.label
        );
    }
}

/// Panels laid out left to right.
pub fn render(panels: &[Panel]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{H:.0}" font-family="sans-serif">"#,
        W * panels.len() as f64
    );
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, W * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
