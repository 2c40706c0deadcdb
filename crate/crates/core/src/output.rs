//! Plain-text writers. Floating-point fields carry 17 significant digits so
//! every value round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::Result;

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Keep the sign of -0.0 out of the files.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Writes a CSV file with the given header and numeric rows.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Coordinate format: a MatrixMarket banner, `rows cols nnz`, then one
/// `row col value` line per nonzero with 1-based indices.
pub fn write_coordinate(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let nnz = m.iter().filter(|&&x| x != 0.0).count();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), nnz)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let x = m[(i, j)];
            if x != 0.0 {
                writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(x))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
