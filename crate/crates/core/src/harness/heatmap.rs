//! Matrix-to-SVG rendering for run artifacts. One rectangle per cell, row
//! index down the page, one column per time step. Output is a pure function
//! of the matrix, so identical data gives byte-identical files.

use crate::error::{Error, Result};
use crate::numerics::Mat;
use std::fs;
use std::path::Path;

const CELL: usize = 8; // px per cell

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Palette {
    /// 0 maps to white, the matrix maximum to black.
    Grayscale,
    /// Binary verdict colors: >= 1/2 renders green, below renders red.
    /// Meant for match/mismatch matrices.
    RedGreen,
}

fn cell_color(v: f64, scale: f64, palette: Palette) -> String {
    match palette {
        Palette::Grayscale => {
            let t = if scale > 0.0 {
                (v / scale).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let level = 255 - (t * 255.0).round() as u16;
            format!("#{level:02x}{level:02x}{level:02x}")
        }
        Palette::RedGreen => {
            if v >= 0.5 {
                "#2f9e44".to_string()
            } else {
                "#e03131".to_string()
            }
        }
    }
}

pub fn render_svg(m: &Mat, palette: Palette) -> Result<String> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::config("cannot render an empty matrix"));
    }
    let scale = m.data().iter().cloned().fold(0.0f64, f64::max);
    let (w, h) = (m.cols() * CELL, m.rows() * CELL);
    let mut svg = String::with_capacity(64 + m.rows() * m.cols() * 64);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" shape-rendering=\"crispEdges\">\n"
    ));
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let fill = cell_color(m.get(r, c), scale, palette);
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\"/>\n",
                c * CELL,
                r * CELL
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_heatmap(m: &Mat, palette: Palette, path: &Path) -> Result<()> {
    fs::write(path, render_svg(m, palette)?)?;
    Ok(())
}
