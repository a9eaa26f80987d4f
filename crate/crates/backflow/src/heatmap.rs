//! Self-contained SVG heatmaps. Row 0 of the matrix is drawn at the bottom,
//! so time runs upward.

use std::fmt::Write;

use crate::CliError;

const CELL: f64 = 10.0;
const MARGIN: f64 = 30.0;

/// Colour stops of the linear scale, low to high.
const STOPS: [(u8, u8, u8); 5] = [(48, 18, 59), (70, 134, 251), (26, 228, 182), (250, 186, 57), (122, 4, 3)];

pub fn render_svg(matrix: &[Vec<f64>], title: Option<&str>) -> Result<String, CliError> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(CliError::Validation("heatmap: empty matrix".into()));
    }
    if let Some(r) = matrix.iter().position(|r| r.len() != cols) {
        return Err(CliError::Validation(format!("heatmap: row {r} has {} entries, expected {cols}", matrix[r].len())));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Validation("heatmap: matrix contains non-finite values".into()));
    }
    let (min, max) = matrix.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    let width = cols as f64 * CELL + 2.0 * MARGIN;
    let height = rows as f64 * CELL + 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    if let Some(t) = title {
        let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{}" font-size="12" font-family="sans-serif">{}</text>"#, MARGIN - 12.0, escape(t));
    }
    for (r, row) in matrix.iter().enumerate() {
        let y = MARGIN + (rows - 1 - r) as f64 * CELL;
        for (c, &v) in row.iter().enumerate() {
            let x = MARGIN + c as f64 * CELL;
            let (red, green, blue) = colour(scale(v, min, max));
            let _ = writeln!(
                svg,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{red:02x}{green:02x}{blue:02x}"/>"##
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{}" font-size="10" font-family="sans-serif">min = {min:.6e}  max = {max:.6e}</text>"#,
        height - MARGIN + 18.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Position on the colour scale; a flat matrix maps to the middle.
fn scale(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        0.5
    }
}

fn colour(t: f64) -> (u8, u8, u8) {
    let x = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
