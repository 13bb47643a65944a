//! Numeric CSV to `(X, y)`.

use std::io::Read;
use std::path::Path;

use datashare_linalg::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub has_header: bool,
    /// Zero-based target column; the last column when absent.
    pub target: Option<usize>,
    /// Divide `X` by its Frobenius norm.
    pub normalize: bool,
    /// Multiply every entry of `X` by `√n`, applied after `normalize`.
    pub sqrt_n_scale: bool,
    pub delimiter: char,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { has_header: false, target: None, normalize: false, sqrt_n_scale: false, delimiter: ',' }
    }
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<(Matrix, Vec<f64>), IngestError> {
    let file = std::fs::File::open(path)
        .map_err(|e| IngestError::Open { path: path.display().to_string(), message: e.to_string() })?;
    ingest_reader(file, opts)
}

/// Lines are counted from 1 and include the header; columns are counted from 1.
pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<(Matrix, Vec<f64>), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(opts.delimiter as u8)
        .from_reader(reader);
    let mut width = None;
    let mut cells = Vec::new();
    let mut n = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && opts.has_header {
            continue;
        }
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(IngestError::RaggedRows { line, expected: w, found: rec.len() });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| IngestError::ParseError { line, column: j + 1, cell: cell.into() })?;
            if !v.is_finite() {
                return Err(IngestError::NonNumericCell { line, column: j + 1, cell: cell.into() });
            }
            cells.push(v);
        }
        n += 1;
    }
    let w = width.ok_or(IngestError::Empty)?;
    if n == 0 {
        return Err(IngestError::Empty);
    }
    let target = opts.target.unwrap_or(w - 1);
    if target >= w || w < 2 {
        return Err(IngestError::TargetOutOfRange(target));
    }
    let p = w - 1;
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for row in cells.chunks(w) {
        for (j, &v) in row.iter().enumerate() {
            if j == target {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    let mut x = Matrix::from_vec(n, p, x).expect("row-major buffer has n * p entries");
    if opts.normalize {
        let f = x.frobenius_norm();
        if f > 0.0 {
            x = x.scaled(1.0 / f);
        }
    }
    if opts.sqrt_n_scale {
        x = x.scaled((n as f64).sqrt());
    }
    Ok((x, y))
}
