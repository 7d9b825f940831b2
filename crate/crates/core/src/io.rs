//! Small CSV and structured-text helpers shared by the file formats.

use ndarray::Array2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Format a float with 17 significant digits, enough to round-trip f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a header line followed by data lines.
pub fn write_lines(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a file into (header, remaining non-empty lines).
pub fn read_lines(path: &Path) -> Result<(String, Vec<String>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().collect::<std::io::Result<Vec<_>>>()?;
    lines.retain(|l| !l.trim().is_empty());
    if lines.is_empty() {
        return Err(Error::Parse(format!("{}: empty file", path.display())));
    }
    let header = lines.remove(0);
    Ok((header, lines))
}

/// Parse a comma-separated row of exactly `expected` floats.
pub fn parse_f64_row(row: &str, expected: usize, path: &Path) -> Result<Vec<f64>> {
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != expected {
        return Err(Error::Parse(format!(
            "{}: expected {expected} fields, got {}",
            path.display(),
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{}: '{f}': {e}", path.display())))
        })
        .collect()
}

/// Render a matrix as CSV lines (no header).
pub fn matrix_to_lines(m: &Array2<f64>) -> Vec<String> {
    m.outer_iter()
        .map(|row| {
            row.iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

/// Parse CSV lines into a matrix, rejecting non-finite entries.
pub fn matrix_from_lines(lines: &[String], path: &Path) -> Result<Array2<f64>> {
    if lines.is_empty() {
        return Err(Error::Parse(format!("{}: empty matrix block", path.display())));
    }
    let cols = lines[0].split(',').count();
    let mut m = Array2::zeros((lines.len(), cols));
    for (i, line) in lines.iter().enumerate() {
        let row = parse_f64_row(line, cols, path)?;
        for (j, v) in row.into_iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    crate::linalg::ensure_finite(&m, "matrix CSV")?;
    Ok(m)
}
