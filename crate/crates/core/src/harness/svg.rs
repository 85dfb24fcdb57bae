//! Minimal SVG line chart of a power curve.

use std::fmt::Write;

use super::PowerCurve;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Rejection rate against `τ`, one polyline per method, with ±2 SE bars.
pub fn power_curve_svg(curve: &PowerCurve, alpha: Option<f64>) -> String {
    let taus: Vec<f64> = curve.cells.iter().map(|c| c.tau).collect();
    let lo = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let x = |t: f64| LEFT + (t - lo) / (hi - lo) * pw;
    let y = |r: f64| TOP + (1.0 - r.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="18">{} (reps={}, seed={})</text>"#,
        curve.family, curve.reps, curve.seed
    );
    // axes and ticks
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT},{TOP} V{} H{}" stroke="black" fill="none"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for i in 0..=5 {
        let r = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y0:.1}" x2="{LEFT}" y2="{y0:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{r:.1}</text>"##,
            LEFT - 4.0,
            LEFT - 6.0,
            y(r) + 4.0,
            y0 = y(r)
        );
    }
    for i in 0..=4 {
        let t = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x(t),
            TOP + ph + 18.0,
            trim(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">tau</text>"#,
        LEFT + pw / 2.0,
        H - 8.0
    );
    if let Some(a) = alpha {
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{ya:.1}" x2="{}" y2="{ya:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
            LEFT + pw,
            ya = y(a)
        );
    }
    for (i, m) in curve.methods().into_iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts = curve.series(m);
        let path: Vec<String> = pts
            .iter()
            .map(|c| format!("{:.1},{:.1}", x(c.tau), y(c.rate)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="2"/>"#,
            path.join(" ")
        );
        for c in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/><line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="{color}"/>"#,
                x(c.tau),
                y(c.rate),
                y(c.rate + 2.0 * c.se),
                y(c.rate - 2.0 * c.se),
                cx = x(c.tau)
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            LEFT + pw + 36.0,
            LEFT + pw + 40.0,
            ly + 4.0,
            m,
            lx = LEFT + pw + 16.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
