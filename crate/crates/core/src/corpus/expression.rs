use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{read_term_list, Corpus, Vocabulary};
use crate::error::{Error, Result};

/// Unrounded cells × genes expression values, row-aligned with the corpus
/// documents built from the same file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    genes: Vec<String>,
    values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(genes: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if genes.len() != values.ncols() {
            return Err(Error::Data(format!(
                "{} gene names for {} matrix columns",
                genes.len(),
                values.ncols()
            )));
        }
        Ok(FeatureMatrix { genes, values })
    }

    pub fn cells(&self) -> usize {
        self.values.nrows()
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn gene_index(&self, gene: &str) -> Option<usize> {
        self.genes.iter().position(|g| g == gene)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Expression of one gene across all cells.
    pub fn column(&self, gene: usize) -> Vec<f64> {
        self.values.column(gene).iter().copied().collect()
    }
}

/// Round half up, the sampler's integer-count policy.
pub(crate) fn round_count(x: f64) -> u32 {
    (x + 0.5).floor() as u32
}

fn read_dense(path: &Path, text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {c} columns, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("not a number: `{f}`")))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok((rows, cols.unwrap_or(0), data))
}

fn read_matrix_market(path: &Path, text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = header.to_lowercase();
    if !header.contains("coordinate") {
        return Err(Error::parse(
            path,
            1,
            "only coordinate Matrix Market files are supported",
        ));
    }
    let symmetric = header.contains("symmetric");
    let mut dims = None;
    let mut data = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(Error::parse(path, i + 1, "expected `rows cols nnz`"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(path, i + 1, e.to_string()));
                let (r, c) = (parse(fields[0])?, parse(fields[1])?);
                dims = Some((r, c));
                data = vec![0.0; r * c];
            }
            Some((r, c)) => {
                if fields.len() < 2 {
                    return Err(Error::parse(path, i + 1, "expected `row col value`"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(path, i + 1, e.to_string()));
                let (ri, ci) = (parse(fields[0])?, parse(fields[1])?);
                if ri == 0 || ci == 0 || ri > r || ci > c {
                    return Err(Error::parse(path, i + 1, format!("entry ({ri}, {ci}) out of bounds")));
                }
                let v = match fields.get(2) {
                    Some(s) => s.parse::<f64>().map_err(|e| Error::parse(path, i + 1, e.to_string()))?,
                    None => 1.0, // pattern matrices
                };
                data[(ri - 1) * c + (ci - 1)] += v;
                if symmetric && ri != ci {
                    data[(ci - 1) * c + (ri - 1)] += v;
                }
            }
        }
    }
    let (r, c) = dims.ok_or_else(|| Error::parse(path, 1, "missing size line"))?;
    Ok((r, c, data))
}

/// Reads a cells × genes expression matrix (dense tab/comma/space separated,
/// or Matrix Market coordinate) plus one gene name per line.
///
/// Cells become documents and genes become words: each entry is rounded half
/// up to an integer count. Cells whose rounded row is all zero are dropped
/// from both the corpus and the returned feature matrix, so row `i` of the
/// feature matrix is document `i`. Genes with zero total count are left out
/// of the corpus vocabulary but kept in the feature matrix.
pub fn ingest_expression_matrix(matrix_file: &Path, gene_names: &Path) -> Result<(Corpus, FeatureMatrix)> {
    let text = fs::read_to_string(matrix_file).map_err(|e| Error::io(matrix_file, e))?;
    let is_mm = text.starts_with("%%MatrixMarket") || matrix_file.extension().and_then(|e| e.to_str()) == Some("mtx");
    let (rows, cols, data) = if is_mm {
        read_matrix_market(matrix_file, &text)?
    } else {
        read_dense(matrix_file, &text)?
    };
    if rows == 0 {
        return Err(Error::Data(format!("{} has no rows", matrix_file.display())));
    }
    let genes = read_term_list(gene_names)?;
    if genes.len() != cols {
        return Err(Error::Data(format!(
            "dimension mismatch: {cols} matrix columns but {} gene names",
            genes.len()
        )));
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Data(format!(
            "expression entry at cell {}, gene {} is negative or non-finite ({})",
            pos / cols,
            pos % cols,
            data[pos]
        )));
    }

    let mut docs = Vec::new();
    let mut kept_rows = Vec::new();
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        let mut doc = Vec::new();
        for (g, &v) in row.iter().enumerate() {
            doc.extend(std::iter::repeat_n(g as u32, round_count(v) as usize));
        }
        if doc.is_empty() {
            continue;
        }
        docs.push(doc);
        kept_rows.push(r);
    }
    if kept_rows.len() < rows {
        log::warn!("dropped {} cell(s) with no expression", rows - kept_rows.len());
    }
    let values = DMatrix::from_fn(kept_rows.len(), cols, |i, j| data[kept_rows[i] * cols + j]);
    let features = FeatureMatrix::new(genes.clone(), values)?;
    let mut corpus = Corpus::new(Vocabulary::new(genes)?, docs, Vec::new())?;
    corpus.dropped_docs += rows - kept_rows.len();
    Ok((corpus, features))
}
