//! Minimal self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 800.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
    pub color: &'a str,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Dots,
    Line,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn chart(title: &str, series: &[Series<'_>], mark: Mark) -> String {
    let finite = series.iter().flat_map(|s| s.values.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(2);
    let x = |i: usize| MARGIN + (W - 2.0 * MARGIN) * i as f64 / (len - 1) as f64;
    let y = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (v, yy) in [(hi, MARGIN), (lo, H - MARGIN)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{:.4}</text>"#,
            MARGIN - 4.0,
            yy + 3.0,
            v
        );
    }
    for (k, s) in series.iter().enumerate() {
        match mark {
            Mark::Dots => {
                for (i, &v) in s.values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="1.2" fill="{}" fill-opacity="0.6"/>"#,
                        x(i),
                        y(v),
                        s.color
                    );
                }
            }
            Mark::Line => {
                let pts: Vec<String> = s
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_finite())
                    .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1"/>"#,
                    pts.join(" "),
                    s.color
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
            W - MARGIN - 150.0,
            MARGIN + 14.0 * (k + 1) as f64,
            s.color,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Points against their index, e.g. returns overlaid on a Normal benchmark.
pub fn scatter(title: &str, series: &[Series<'_>]) -> String {
    chart(title, series, Mark::Dots)
}

pub fn lines(title: &str, series: &[Series<'_>]) -> String {
    chart(title, series, Mark::Line)
}

/// One black square per set cell.
pub fn raster(rows: &[Vec<bool>], cell: usize) -> String {
    let width = rows.first().map_or(0, Vec::len) * cell;
    let height = rows.len() * cell;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (r, row) in rows.iter().enumerate() {
        for (c, _) in row.iter().enumerate().filter(|(_, &on)| on) {
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="black"/>"#,
                c * cell,
                r * cell
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
