//! File formats used by the CLI: CSV matrices and label vectors, Matrix
//! Market coordinate files, and binary (P5) PGM heatmaps.

use ndarray::Array2;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{DataMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    MatrixMarket,
}

impl MatrixFormat {
    /// .mtx / .mm files are Matrix Market, everything else CSV.
    pub fn from_path(path: &Path) -> MatrixFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("mtx") | Some("mm") => MatrixFormat::MatrixMarket,
            _ => MatrixFormat::Csv,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DataMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    match format {
        MatrixFormat::Csv => parse_csv_matrix(path, &text),
        MatrixFormat::MatrixMarket => parse_matrix_market(path, &text),
    }
}

/// CSV: numeric cells, optional single header row, rows must be equal length.
fn parse_csv_matrix(path: &Path, text: &str) -> Result<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut first_data_line = true;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                match width {
                    None => width = Some(vals.len()),
                    Some(w) if w != vals.len() => {
                        return Err(parse_err(
                            path,
                            lineno + 1,
                            format!("row has {} cells, expected {}", vals.len(), w),
                        ))
                    }
                    _ => {}
                }
                rows.push(vals);
                first_data_line = false;
            }
            Err(_) => {
                if first_data_line && rows.is_empty() {
                    // header row
                    first_data_line = false;
                    continue;
                }
                let col = cells
                    .iter()
                    .position(|c| c.parse::<f64>().is_err())
                    .unwrap_or(0);
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("non-numeric cell in column {}", col + 1),
                ));
            }
        }
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no numeric rows found"));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_fn((n, p), |(i, j)| rows[i][j]))
}

/// Matrix Market coordinate format, real general or symmetric, loaded dense.
fn parse_matrix_market(path: &Path, text: &str) -> Result<DataMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header_lc = header.to_ascii_lowercase();
    if !header_lc.starts_with("%%matrixmarket") {
        return Err(parse_err(path, 1, "missing %%MatrixMarket header"));
    }
    if !header_lc.contains("coordinate") {
        return Err(parse_err(path, 1, "only coordinate format is supported"));
    }
    if !(header_lc.contains("real") || header_lc.contains("integer")) {
        return Err(parse_err(path, 1, "only real-valued matrices are supported"));
    }
    let symmetric = header_lc.contains("symmetric");
    if !symmetric && !header_lc.contains("general") {
        return Err(parse_err(path, 1, "expected general or symmetric storage"));
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut m: Option<Array2<f64>> = None;
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(path, lineno + 1, "expected 'rows cols nnz'"));
                }
                let n: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad row count"))?;
                let p: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad column count"))?;
                let nnz: usize = fields[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad entry count"))?;
                dims = Some((n, p, nnz));
                m = Some(Array2::zeros((n, p)));
            }
            Some((n, p, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(path, lineno + 1, "expected 'i j value'"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad row index"))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad column index"))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno + 1, "bad value"))?;
                if i < 1 || i > n || j < 1 || j > p {
                    return Err(parse_err(path, lineno + 1, "index out of bounds"));
                }
                let mm = m.as_mut().expect("dims parsed");
                mm[[i - 1, j - 1]] = v;
                if symmetric && i != j {
                    mm[[j - 1, i - 1]] = v;
                }
                seen += 1;
            }
        }
    }
    let (_, _, nnz) = dims.ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    if seen != nnz {
        return Err(parse_err(
            path,
            1,
            format!("expected {nnz} entries, found {seen}"),
        ));
    }
    Ok(m.expect("allocated with dims"))
}

pub fn save_matrix_csv(path: &Path, m: &DataMatrix) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Shortest round-trip float formatting (Rust's default Display for f64).
fn format_float(v: f64) -> String {
    format!("{v}")
}

pub fn save_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(
            line.parse::<usize>()
                .map_err(|_| parse_err(path, lineno + 1, "expected a nonnegative integer"))?,
        );
    }
    if labels.is_empty() {
        return Err(parse_err(path, 1, "no labels found"));
    }
    Ok(labels)
}

/// Write a matrix as a binary (P5) 8-bit PGM, min-max scaled per matrix.
pub fn save_pgm(path: &Path, m: &DataMatrix) -> Result<()> {
    let (lo, hi) = m
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let mut bytes = Vec::with_capacity(m.len() + 32);
    bytes.extend_from_slice(format!("P5\n{} {}\n255\n", m.ncols(), m.nrows()).as_bytes());
    for v in m.iter() {
        bytes.push(((v - lo) * scale).round().clamp(0.0, 255.0) as u8);
    }
    let mut f = fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(&bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read back a P5 PGM as (width, height, pixels). Used for round-trip checks.
pub fn load_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let header_end = bytes
        .windows(1)
        .enumerate()
        .filter(|(_, w)| w[0] == b'\n')
        .map(|(i, _)| i)
        .nth(2)
        .ok_or_else(|| parse_err(path, 1, "truncated PGM header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| parse_err(path, 1, "invalid PGM header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("P5") {
        return Err(parse_err(path, 1, "not a P5 PGM"));
    }
    let w: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "bad width"))?;
    let h: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "bad height"))?;
    if parts.next() != Some("255") {
        return Err(parse_err(path, 1, "expected maxval 255"));
    }
    let pixels = bytes[header_end + 1..].to_vec();
    if pixels.len() != w * h {
        return Err(parse_err(path, 1, "pixel payload size mismatch"));
    }
    Ok((w, h, pixels))
}
