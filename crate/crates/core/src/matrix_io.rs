//! Dense matrix files.
//!
//! Binary layout (little endian): a 16-byte header of magic `b"DMAT"`, format
//! version `u32 = 1`, `rows: u32`, `cols: u32`, followed by `rows * cols`
//! `f64` values in row-major order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DMAT";
pub const VERSION: u32 = 1;

pub fn encode_dense(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_dense(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Data("not a dense matrix file (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Data(format!("unsupported dense matrix version {version}")));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    if bytes.len() != 16 + 8 * rows * cols {
        return Err(Error::Data(format!(
            "dense matrix payload is {} bytes, expected {} for {rows}x{cols}",
            bytes.len() - 16,
            8 * rows * cols
        )));
    }
    let payload = &bytes[16..];
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let k = 8 * (i * cols + j);
        f64::from_le_bytes(payload[k..k + 8].try_into().unwrap())
    }))
}

pub fn write_dense(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, encode_dense(m)).map_err(|e| Error::io(path, e))
}

pub fn read_dense(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dense(&bytes)
}

/// Tab-separated rows, optionally prefixed by a label column. Values are
/// written with Rust's shortest round-trip formatting.
pub fn write_tsv(path: &Path, m: &DMatrix<f64>, labels: Option<&[String]>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for i in 0..m.nrows() {
        if let Some(labels) = labels {
            write!(w, "{}\t", labels[i]).map_err(io)?;
        }
        for j in 0..m.ncols() {
            if j > 0 {
                w.write_all(b"\t").map_err(|e| Error::io(path, e))?;
            }
            write!(w, "{}", m[(i, j)]).map_err(|e| Error::io(path, e))?;
        }
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a matrix written by [`write_tsv`]; `labelled` skips the first column.
pub fn read_tsv(path: &Path, labelled: bool) -> Result<(DMatrix<f64>, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        if labelled {
            labels.push(fields.next().unwrap_or_default().to_string());
        }
        let row = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, i + 1, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(path, i + 1, "ragged row"));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok((DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]), labels))
}
