//! Grayscale SVG heatmaps of 2D nodal fields.
//!
//! One `<rect>` per node, black at the field minimum and white at the
//! maximum, with axis labels and a value-range legend.  The output is a pure
//! function of the field values, so identical inputs produce byte-identical
//! files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::grid::ScalarField;
use crate::scalar::Scalar;
use crate::{Error, Result};

const IMAGE_SPAN: f64 = 512.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;
const LEGEND_WIDTH: f64 = 150.0;

/// Writes `bytes` to `path` atomically: the data lands under a temporary
/// name in the same directory and is renamed into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn gray(t: f64) -> String {
    let level = (t.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{level:02x}{level:02x}{level:02x}")
}

/// Renders a 2D field as an SVG heatmap string.
pub fn heatmap_svg<T: Scalar>(field: &ScalarField<T>) -> Result<String> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(Error::Precondition(format!(
            "heatmap needs a 2D field, got dimension {}",
            grid.dim()
        )));
    }
    let (n1, n2) = (grid.n(0), grid.n(1));
    let cell = IMAGE_SPAN / n1.max(n2) as f64;
    let (pw, ph) = (cell * n1 as f64, cell * n2 as f64);
    let width = MARGIN_LEFT + pw + LEGEND_WIDTH;
    let height = MARGIN_TOP + ph + MARGIN_BOTTOM;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for id in 0..grid.node_count() {
        let v = field.get(id).as_f64();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;

    let mut s = String::with_capacity(grid.node_count() * 64 + 4096);
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" \
         viewBox=\"0 0 {width:.1} {height:.1}\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width:.1}\" height=\"{height:.1}\" fill=\"#ffffff\"/>\n"
    ));

    // node squares; axis 2 grows upward, SVG y grows downward
    for i2 in 0..n2 {
        let y = MARGIN_TOP + (n2 - 1 - i2) as f64 * cell;
        for i1 in 0..n1 {
            let v = field.get(i2 * n1 + i1).as_f64();
            let t = if span > 0.0 { (v - lo) / span } else { 0.5 };
            let x = MARGIN_LEFT + i1 as f64 * cell;
            s.push_str(&format!(
                "<rect x=\"{x:.4}\" y=\"{y:.4}\" width=\"{cell:.4}\" height=\"{cell:.4}\" \
                 fill=\"{}\"/>\n",
                gray(t)
            ));
        }
    }

    // axis labels with the coordinate extents
    let (x_lo, x_hi) = grid.extent(0);
    let (y_lo, y_hi) = grid.extent(1);
    let base = MARGIN_TOP + ph;
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"middle\">x1</text>\n",
        MARGIN_LEFT + pw / 2.0,
        base + 34.0
    ));
    s.push_str(&format!(
        "<text x=\"{MARGIN_LEFT:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
         text-anchor=\"middle\">{}</text>\n",
        base + 16.0,
        x_lo.as_f64()
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + pw,
        base + 16.0,
        x_hi.as_f64()
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"end\">x2</text>\n",
        MARGIN_LEFT - 28.0,
        MARGIN_TOP + ph / 2.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
         text-anchor=\"end\">{}</text>\n",
        MARGIN_LEFT - 6.0,
        base,
        y_lo.as_f64()
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
         text-anchor=\"end\">{}</text>\n",
        MARGIN_LEFT - 6.0,
        MARGIN_TOP + 10.0,
        y_hi.as_f64()
    ));

    // legend: 16-step gray ramp plus the value range
    let lx = MARGIN_LEFT + pw + 28.0;
    let lh = ph.min(256.0);
    let step = lh / 16.0;
    for k in 0..16 {
        let y = MARGIN_TOP + lh - (k + 1) as f64 * step;
        s.push_str(&format!(
            "<rect x=\"{lx:.1}\" y=\"{y:.4}\" width=\"18\" height=\"{step:.4}\" fill=\"{}\"/>\n",
            gray((k as f64 + 0.5) / 16.0)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\">max = {:e}</text>\n",
        lx + 24.0,
        MARGIN_TOP + 10.0,
        hi
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\">min = {:e}</text>\n",
        lx + 24.0,
        MARGIN_TOP + lh,
        lo
    ));
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders the field and writes the SVG atomically to `path`.
pub fn emit_heatmap<T: Scalar>(field: &ScalarField<T>, path: &Path) -> Result<()> {
    let svg = heatmap_svg(field)?;
    write_atomic(path, svg.as_bytes())
}
