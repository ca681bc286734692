//! Diffusion-map embedding of a similarity graph.
//!
//! The kernel is first density-normalized (`α = 1`):
//! `W̃ = Q⁻¹ W Q⁻¹` with `Q = diag(Σ_j W_ij)`. The Markov matrix is
//! `P = D̃⁻¹ W̃`, `D̃ = diag(Σ_j W̃_ij)`. Because `P` is not symmetric we
//! diagonalize the conjugate `S = D̃^{-1/2} W̃ D̃^{-1/2}` (same spectrum, real)
//! and map its orthonormal eigenvectors `φ` to right eigenvectors of `P`
//! through `ψ = D̃^{-1/2} φ`. Eigenvalues equal to 1 (one per connected
//! component) are the trivial, constant-per-component pairs and are dropped.
//! The coordinates of word `i` are `(λ_1^t ψ_1(i), …, λ_m^t ψ_m(i))`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cooccurrence::SimilarityGraph;
use crate::error::{Error, Result};

/// Eigenvalues within this distance of 1 are treated as trivial.
pub const TRIVIAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DiffusionEmbedding {
    /// V × m coordinates, column k = `λ_k^t ψ_k`.
    pub coords: DMatrix<f64>,
    /// Retained eigenvalues (singular values for [`svd_embed`]), descending.
    pub eigenvalues: Vec<f64>,
    /// V × m right eigenvectors of `P` (left singular vectors for [`svd_embed`]).
    pub vectors: DMatrix<f64>,
    pub t: u32,
    /// Number of eigenvalue-1 pairs removed.
    pub trivial_removed: usize,
}

impl DiffusionEmbedding {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn write_tsv(&self, path: &Path, terms: &[String]) -> Result<()> {
        crate::matrix_io::write_tsv(path, &self.coords, Some(terms))
    }

    pub fn write_eigenvalues(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for l in &self.eigenvalues {
            writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Full spectrum of the diffusion operator, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct DiffusionSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Column k is the right eigenvector `ψ_k` of `P`, normalized so `ψᵀ π ψ = 1` with `π = D̃ / ΣD̃`;
    /// this makes `ψ_0` the all-ones vector and the scale of `W` irrelevant.
    pub right_vectors: DMatrix<f64>,
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), (0..m.nrows()).map(|i| m.row(i).sum()))
}

fn check_graph(graph: &SimilarityGraph) -> Result<()> {
    let w = &graph.w;
    if !w.is_square() || w.nrows() < 2 {
        return Err(Error::Data("graph must be square with at least 2 nodes".into()));
    }
    for i in 0..w.nrows() {
        let mut any = false;
        for j in 0..w.ncols() {
            let x = w[(i, j)];
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Data(format!(
                    "graph weight ({i}, {j}) = {x} is negative or non-finite"
                )));
            }
            if x != w[(j, i)] {
                return Err(Error::Data(format!("graph is not symmetric at ({i}, {j})")));
            }
            any |= x > 0.0;
        }
        if !any {
            return Err(Error::Data(format!("graph row {i} is all zero")));
        }
    }
    Ok(())
}

/// Density-normalized kernel `W̃` and its degrees `D̃`.
fn anisotropic_kernel(w: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let q = row_sums(w);
    let n = w.nrows();
    let kernel = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (q[i] * q[j]));
    let d = row_sums(&kernel);
    (kernel, d)
}

/// The row-stochastic Markov matrix `P = D̃⁻¹ W̃`.
pub fn transition_matrix(graph: &SimilarityGraph) -> Result<DMatrix<f64>> {
    check_graph(graph)?;
    let (kernel, d) = anisotropic_kernel(&graph.w);
    let n = kernel.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| kernel[(i, j)] / d[i]))
}

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn diffusion_spectrum(graph: &SimilarityGraph) -> Result<DiffusionSpectrum> {
    check_graph(graph)?;
    let (kernel, d) = anisotropic_kernel(&graph.w);
    let n = kernel.nrows();
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut s = DMatrix::from_fn(n, n, |i, j| kernel[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    // exact symmetry for the solver
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    let eig = SymmetricEigen::try_new(s, 1e-15, 100_000)
        .ok_or_else(|| Error::Numerical("diffusion eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vol_sqrt = d.sum().sqrt();
    let mut right_vectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])] * inv_sqrt[i] * vol_sqrt);
    fix_signs(&mut right_vectors);
    Ok(DiffusionSpectrum {
        eigenvalues,
        right_vectors,
    })
}

/// Diffusion-map embedding with `m` nontrivial components at time `t`.
///
/// Requires `1 <= m <= V - 1`. A disconnected graph has one trivial pair per
/// component; all of them are dropped (with a warning), so fewer than `m`
/// columns come back when the remaining spectrum is shorter than `m`.
pub fn diffusion_embed(graph: &SimilarityGraph, m: usize, t: u32) -> Result<DiffusionEmbedding> {
    let v = graph.len();
    if m == 0 || m + 1 > v {
        return Err(Error::Config(format!(
            "embedding dimension m = {m} must be in 1..={}",
            v.saturating_sub(1)
        )));
    }
    if t == 0 {
        return Err(Error::Config("diffusion time t must be positive".into()));
    }
    embedding_from_spectrum(&diffusion_spectrum(graph)?, m, t)
}

/// Cuts an embedding out of a precomputed spectrum; see [`diffusion_embed`].
pub fn embedding_from_spectrum(spectrum: &DiffusionSpectrum, m: usize, t: u32) -> Result<DiffusionEmbedding> {
    let v = spectrum.eigenvalues.len();
    if m == 0 || m + 1 > v {
        return Err(Error::Config(format!(
            "embedding dimension m = {m} must be in 1..={}",
            v.saturating_sub(1)
        )));
    }
    if t == 0 {
        return Err(Error::Config("diffusion time t must be positive".into()));
    }
    let trivial = spectrum
        .eigenvalues
        .iter()
        .take_while(|&&l| (l - 1.0).abs() <= TRIVIAL_TOL)
        .count();
    if trivial == 0 {
        return Err(Error::Numerical(format!(
            "leading diffusion eigenvalue {} is not 1",
            spectrum.eigenvalues[0]
        )));
    }
    if trivial > 1 {
        log::warn!("similarity graph has {trivial} connected components; dropping {trivial} trivial eigenpairs");
    }
    let keep = m.min(v - trivial);
    if keep < m {
        log::warn!("only {keep} nontrivial diffusion components available (asked for {m})");
    }
    let cols: Vec<usize> = (trivial..trivial + keep).collect();
    let eigenvalues: Vec<f64> = cols.iter().map(|&k| spectrum.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(v, keep, |i, c| spectrum.right_vectors[(i, cols[c])]);
    let coords = DMatrix::from_fn(v, keep, |i, c| eigenvalues[c].powi(t as i32) * vectors[(i, c)]);
    if coords.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite diffusion coordinates".into()));
    }
    Ok(DiffusionEmbedding {
        coords,
        eigenvalues,
        vectors,
        t,
        trivial_removed: trivial,
    })
}

/// Ablation: top-`m` left singular vectors of `W` scaled by singular values.
pub fn svd_embed(graph: &SimilarityGraph, m: usize) -> Result<DiffusionEmbedding> {
    check_graph(graph)?;
    let v = graph.len();
    if m == 0 || m + 1 > v {
        return Err(Error::Config(format!(
            "embedding dimension m = {m} must be in 1..={}",
            v - 1
        )));
    }
    let svd = graph
        .w
        .clone()
        .try_svd(true, false, 1e-15, 100_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order[..m].iter().map(|&k| svd.singular_values[k]).collect();
    let mut vectors = DMatrix::from_fn(v, m, |i, c| u[(i, order[c])]);
    fix_signs(&mut vectors);
    let coords = DMatrix::from_fn(v, m, |i, c| eigenvalues[c] * vectors[(i, c)]);
    Ok(DiffusionEmbedding {
        coords,
        eigenvalues,
        vectors,
        t: 1,
        trivial_removed: 0,
    })
}
