use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};

/// Standardizes columns (zero mean, unit sample variance; constant columns
/// are only centered).
fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let mean = x.column(j).mean();
        let var = if n > 1 {
            x.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for i in 0..n {
            out[(i, j)] = (x[(i, j)] - mean) * scale;
        }
    }
    out
}

/// Principal component scores (rows = cells) from the eigendecomposition of
/// whichever Gram matrix is smaller.
fn pca_scores(x: &DMatrix<f64>, dims: usize) -> Result<DMatrix<f64>> {
    let (n, g) = x.shape();
    let descending = |eig: &SymmetricEigen<f64, nalgebra::Dyn>| {
        let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        idx
    };
    let solve = |m: DMatrix<f64>| {
        SymmetricEigen::try_new(m, 1e-14, 10_000)
            .ok_or_else(|| Error::Numerical("PCA eigensolver did not converge".into()))
    };
    if g <= n {
        let eig = solve(x.transpose() * x)?;
        let order = descending(&eig);
        let basis = DMatrix::from_fn(g, dims, |i, k| eig.eigenvectors[(i, order[k])]);
        Ok(x * basis)
    } else {
        let eig = solve(x * x.transpose())?;
        let order = descending(&eig);
        Ok(DMatrix::from_fn(n, dims, |i, k| {
            let l = eig.eigenvalues[order[k]].max(0.0);
            eig.eigenvectors[(i, order[k])] * l.sqrt()
        }))
    }
}

/// For every cell, the set containing the cell and its `k` nearest neighbors
/// by Euclidean distance in the top `pca_dims` principal components of the
/// standardized features. Distance ties go to the lower cell id. Each set is
/// returned in ascending id order.
pub fn knn_neighborhoods(features: &FeatureMatrix, k: usize, pca_dims: usize) -> Result<Vec<Vec<usize>>> {
    let x = features.values();
    let (n, g) = x.shape();
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if k >= n {
        return Err(Error::Config(format!(
            "k = {k} must be smaller than the number of cells ({n})"
        )));
    }
    if pca_dims == 0 || pca_dims > n.min(g) {
        return Err(Error::Config(format!(
            "pca_dims = {pca_dims} must be in 1..={}",
            n.min(g)
        )));
    }
    let scores = pca_scores(&standardize(x), pca_dims)?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| scores.row(i).iter().copied().collect()).collect();

    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut dist: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    (d, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut set: Vec<usize> = dist[..k].iter().map(|&(_, j)| j).collect();
            set.push(i);
            set.sort_unstable();
            set
        })
        .collect())
}

/// One line per cell: the cell id followed by its member ids, tab separated.
pub fn write_neighborhoods(path: &Path, sets: &[Vec<usize>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (cell, set) in sets.iter().enumerate() {
        let members: Vec<String> = set.iter().map(usize::to_string).collect();
        writeln!(w, "{cell}\t{}", members.join("\t")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_neighborhoods(path: &Path) -> Result<Vec<Vec<usize>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut sets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ids = line
            .split_whitespace()
            .map(|f| f.parse::<usize>().map_err(|e| Error::parse(path, i + 1, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if ids.first() != Some(&sets.len()) {
            return Err(Error::parse(path, i + 1, format!("expected cell id {}", sets.len())));
        }
        sets.push(ids[1..].to_vec());
    }
    Ok(sets)
}
