//! Minimal SVG line plots: one panel per signal, laid out in a near-square
//! grid, with an optional second file overlaid panel by panel.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::eval::fft_real;

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 140.0;
const PAD: f64 = 10.0;
const COLORS: [&str; 2] = ["#1f4fd1", "#8a2be2"];

/// Columns and rows for `n` panels: `ceil(sqrt(n))` columns.
pub fn grid_dims(n: usize) -> (usize, usize) {
    let mut cols = (n as f64).sqrt().ceil() as usize;
    while cols * cols < n {
        cols += 1;
    }
    let cols = cols.max(1);
    (cols, n.div_ceil(cols).max(1))
}

/// Renders `series[file][signal]`. With `spectrum` each signal is replaced
/// by its one-sided FFT magnitude.
pub fn render_svg(series: &[Vec<Vec<f64>>], spectrum: bool) -> Result<String> {
    let first = series
        .first()
        .ok_or_else(|| Error::Config("plot needs at least one signal file".into()))?;
    if series.len() > 2 {
        return Err(Error::Config(
            "plot overlays at most two signal files".into(),
        ));
    }
    for other in &series[1..] {
        let shape = |s: &Vec<Vec<f64>>| vec![s.len(), s.first().map_or(0, Vec::len)];
        if shape(other) != shape(first) {
            return Err(Error::ShapeMismatch {
                op: "plot",
                left: shape(first),
                right: shape(other),
            });
        }
    }
    let lines: Vec<Vec<Vec<f64>>> = series
        .iter()
        .map(|file| {
            file.iter()
                .map(|s| {
                    if spectrum {
                        fft_real(s).map(|sp| sp.magnitudes)
                    } else {
                        Ok(s.clone())
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let n = first.len();
    let (cols, rows) = grid_dims(n);
    let (w, h) = (cols as f64 * PANEL_W, rows as f64 * PANEL_H);
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    for i in 0..n {
        let (ox, oy) = ((i % cols) as f64 * PANEL_W, (i / cols) as f64 * PANEL_H);
        writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#cccccc"/>"##,
            ox + PAD / 2.0,
            oy + PAD / 2.0,
            PANEL_W - PAD,
            PANEL_H - PAD
        )
        .unwrap();
        let (lo, hi) = lines
            .iter()
            .flat_map(|f| f[i].iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        for (file, color) in lines.iter().zip(COLORS) {
            let s = &file[i];
            let last = (s.len().max(2) - 1) as f64;
            let points: Vec<String> = s
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let x = ox + PAD + (PANEL_W - 2.0 * PAD) * j as f64 / last;
                    let frac = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                    let y = oy + PAD + (PANEL_H - 2.0 * PAD) * (1.0 - frac);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                points.join(" ")
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
