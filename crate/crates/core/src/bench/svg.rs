use std::fmt::Write as _;
use std::path::Path;

use crate::solver::Trace;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_Y: f64 = 40.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// `(iteration, f)` pairs; a trace without records contributes its start.
fn points(trace: &Trace) -> Vec<(f64, f64)> {
    if trace.records.is_empty() {
        return vec![(0.0, trace.f0)];
    }
    trace
        .records
        .iter()
        .map(|r| (r.iter as f64, r.f))
        .filter(|(_, f)| f.is_finite())
        .collect()
}

/// Renders `log10(f − f_best)` against iteration, one polyline per trace.
pub fn render_convergence_svg(traces: &[(String, Trace)]) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::usage("convergence plot needs at least one trace"));
    }
    let series: Vec<Vec<(f64, f64)>> = traces.iter().map(|(_, t)| points(t)).collect();
    let f_best = series
        .iter()
        .flatten()
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    let floor = 1e-16 * f_best.abs().max(1.0);
    let logged: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.iter().map(|&(i, f)| (i, (f - f_best).max(floor).log10())).collect())
        .collect();

    let all = logged.iter().flatten();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_hi - x_lo < 1.0 {
        x_hi = x_lo + 1.0;
    }
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil();
    if y_hi - y_lo < 1.0 {
        y_hi = y_lo + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_Y + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let decades = (y_hi - y_lo) as i64;
    let step = (decades / 8).max(1);
    let mut d = y_lo as i64;
    while d <= y_hi as i64 {
        let y = sy(d as f64);
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="lightgray"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
        d += step;
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration ({x_lo}..{x_hi})</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        w,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">f - f_best</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (k, ((label, _), pts)) in traces.iter().zip(&logged).enumerate() {
        let color = COLORS[k % COLORS.len()];
        match pts.len() {
            0 => {}
            1 => {
                let _ = writeln!(
                    w,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(pts[0].0),
                    sy(pts[0].1)
                );
            }
            _ => {
                let coords: Vec<String> = pts
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    w,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    coords.join(" ")
                );
            }
        }
        let ly = MARGIN_Y + 14.0 + 16.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w + 10.0;
        let _ = writeln!(
            w,
            r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="3" fill="{color}"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 16.0,
            escape(label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

pub fn emit_convergence_svg(traces: &[(String, Trace)], path: impl AsRef<Path>) -> Result<()> {
    let svg = render_convergence_svg(traces)?;
    std::fs::write(path, svg)?;
    Ok(())
}
