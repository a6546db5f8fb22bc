//! Hand-written SVG: embedding scatter, token heatmap, attention heatmap.

use std::fmt::Write;

use crate::math::Matrix;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// White-to-red for `v` in `[0, 1]`.
fn heat(v: f64) -> String {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let g = (255.0 * (1.0 - v)).round() as u8;
    format!("#ff{g:02x}{g:02x}")
}

/// Scatter of `points` (`n × 2`), one color per label.
pub fn scatter_svg(points: &Matrix, labels: &[usize], title: &str) -> String {
    let (w, h, pad) = (480.0, 480.0, 40.0);
    let n = points.rows();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in 0..n {
        x0 = x0.min(points.get(r, 0));
        x1 = x1.max(points.get(r, 0));
        y0 = y0.min(points.get(r, 1));
        y1 = y1.max(points.get(r, 1));
    }
    let sx = if x1 > x0 { (w - 2.0 * pad) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (h - 2.0 * pad) / (y1 - y0) } else { 1.0 };
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for r in 0..n {
        let px = pad + (points.get(r, 0) - if x0.is_finite() { x0 } else { 0.0 }) * sx;
        let py = h - pad - (points.get(r, 1) - if y0.is_finite() { y0 } else { 0.0 }) * sy;
        let color = PALETTE[labels.get(r).copied().unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#);
    }
    out.push_str("</svg>\n");
    out
}

/// One cell per token, shaded by score normalized to the document maximum.
pub fn token_heatmap_svg(tokens: &[String], scores: &[f64]) -> String {
    let cell_h = 28.0;
    let widths: Vec<f64> = tokens.iter().map(|t| 12.0 + 8.0 * t.chars().count() as f64).collect();
    let total: f64 = widths.iter().sum::<f64>() + 10.0;
    let max = scores.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{}">"#, cell_h + 10.0);
    let mut x = 5.0;
    for (i, (tok, wd)) in tokens.iter().zip(&widths).enumerate() {
        let v = if max > 0.0 { scores.get(i).copied().unwrap_or(0.0) / max } else { 0.0 };
        let _ = writeln!(out, r##"<rect x="{x}" y="5" width="{wd}" height="{cell_h}" fill="{}" stroke="#ccc"/>"##, heat(v));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="monospace" font-size="13">{}</text>"#,
            x + wd / 2.0,
            5.0 + cell_h * 0.65,
            escape(tok)
        );
        x += wd;
    }
    out.push_str("</svg>\n");
    out
}

/// Target step × source position heatmap of alignment weights.
pub fn attention_heatmap_svg(weights: &[Vec<f64>], source: &[String], target: &[String]) -> String {
    let cell = 24.0;
    let (left, top) = (90.0, 90.0);
    let cols = weights.first().map_or(0, Vec::len);
    let width = left + cell * cols as f64 + 10.0;
    let height = top + cell * weights.len() as f64 + 10.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (j, tok) in source.iter().enumerate().take(cols) {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" transform="rotate(-60 {x} {})" font-family="monospace" font-size="12">{}</text>"#,
            top - 6.0,
            top - 6.0,
            escape(tok)
        );
    }
    for (i, row) in weights.iter().enumerate() {
        let y = top + cell * i as f64;
        let label = target.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="monospace" font-size="12">{}</text>"#,
            left - 6.0,
            y + cell * 0.65,
            escape(label)
        );
        for (j, a) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="#eee"><title>{a:.4}</title></rect>"##,
                left + cell * j as f64,
                heat(*a)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
