//! Plain-text and image output for grid functions and measurement matrices.
//!
//! Formats are deliberately dumb: CSV with a fixed float format (so identical
//! runs produce identical bytes) and 16-bit binary PGM for quick looks at
//! reconstructed fields. Complex fields are written as separate real and
//! imaginary files by the callers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::grid::Grid2D;

/// Fixed-width scientific float formatting used by every CSV writer.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a real grid function as CSV: a `n_cells,h` header pair, then one
/// line per node row (`l = 0` first), `n_cells + 1` values each.
pub fn write_grid_csv(path: &Path, grid: Grid2D, values: &[f64]) -> std::io::Result<()> {
    assert_eq!(values.len(), grid.n_nodes(), "value count must match grid");
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "n_cells,h")?;
    writeln!(w, "{},{}", grid.n_cells(), fmt_float(grid.h()))?;
    let s = grid.nodes_per_side();
    for l in 0..s {
        let row: Vec<String> = (0..s).map(|k| fmt_float(values[grid.node_index(k, l)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// Writes a real matrix as bare CSV rows.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_float(m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// Writes a real grid function as a 16-bit grayscale PGM (binary `P5`),
/// linearly mapping `[min, max]` to `[0, 65535]`. The top image row is the
/// `y = 1` side so the picture matches the usual orientation of the square.
pub fn write_grid_pgm(path: &Path, grid: Grid2D, values: &[f64]) -> std::io::Result<()> {
    assert_eq!(values.len(), grid.n_nodes(), "value count must match grid");
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let s = grid.nodes_per_side();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P5")?;
    writeln!(w, "# min={} max={}", fmt_float(lo), fmt_float(hi))?;
    writeln!(w, "{s} {s}")?;
    writeln!(w, "65535")?;
    for l in (0..s).rev() {
        for k in 0..s {
            let v = values[grid.node_index(k, l)];
            let t = if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
            let pix = (t * 65535.0).round() as u16;
            w.write_all(&pix.to_be_bytes())?;
        }
    }
    w.flush()
}
