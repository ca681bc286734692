//! Context windows, PPMI, and word–word similarity graphs.
//!
//! All association statistics are presence-based: inside one context a term
//! counts once no matter how many tokens of it occur, so
//! `p(w_i, w_j) <= min(p(w_i), p(w_j))` always holds. Logarithms are natural.

mod knn;

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use knn::{knn_neighborhoods, read_neighborhoods, write_neighborhoods};

/// How a corpus is cut into contexts.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowStrategy {
    /// Each document is one context.
    Document,
    /// Overlapping windows of the given length, stride 1. A document shorter
    /// than the window is a single context.
    Sliding(usize),
    /// One context per document (cell): the union of terms present in the
    /// cells of its neighborhood.
    Neighborhood(Neighborhoods),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    /// `sets[c]` lists the member cells of cell `c`'s neighborhood, including `c`.
    pub sets: Vec<Vec<usize>>,
    /// A gene is present in a cell when its rounded count is at least this.
    pub min_count: u32,
}

impl Neighborhoods {
    pub fn new(sets: Vec<Vec<usize>>) -> Self {
        Neighborhoods { sets, min_count: 1 }
    }
}

impl fmt::Display for WindowStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowStrategy::Document => write!(f, "document"),
            WindowStrategy::Sliding(w) => write!(f, "sliding:{w}"),
            WindowStrategy::Neighborhood(n) => write!(f, "neighborhood:{}", n.sets.len()),
        }
    }
}

impl WindowStrategy {
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        match self {
            WindowStrategy::Document => Ok(()),
            WindowStrategy::Sliding(w) if *w < 2 => {
                Err(Error::Config(format!("sliding window length must be >= 2, got {w}")))
            }
            WindowStrategy::Sliding(_) => Ok(()),
            WindowStrategy::Neighborhood(n) => {
                if n.sets.len() != corpus.num_docs() {
                    return Err(Error::Config(format!(
                        "{} neighborhoods for {} cells",
                        n.sets.len(),
                        corpus.num_docs()
                    )));
                }
                for (c, set) in n.sets.iter().enumerate() {
                    if !set.contains(&c) {
                        return Err(Error::Config(format!("neighborhood of cell {c} does not contain it")));
                    }
                    if let Some(&bad) = set.iter().find(|&&m| m >= corpus.num_docs()) {
                        return Err(Error::Config(format!(
                            "neighborhood of cell {c} names unknown cell {bad}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Calls `f` once per context with the sorted, deduplicated term ids it contains.
pub fn for_each_context(corpus: &Corpus, strategy: &WindowStrategy, mut f: impl FnMut(&[u32])) -> Result<()> {
    strategy.validate(corpus)?;
    let mut buf: Vec<u32> = Vec::new();
    let emit = |buf: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])| {
        buf.sort_unstable();
        buf.dedup();
        if !buf.is_empty() {
            f(buf);
        }
    };
    match strategy {
        WindowStrategy::Document => {
            for doc in corpus.docs() {
                buf.clear();
                buf.extend_from_slice(doc);
                emit(&mut buf, &mut f);
            }
        }
        WindowStrategy::Sliding(w) => {
            for doc in corpus.docs() {
                if doc.len() <= *w {
                    buf.clear();
                    buf.extend_from_slice(doc);
                    emit(&mut buf, &mut f);
                    continue;
                }
                for window in doc.windows(*w) {
                    buf.clear();
                    buf.extend_from_slice(window);
                    emit(&mut buf, &mut f);
                }
            }
        }
        WindowStrategy::Neighborhood(n) => {
            let counts = corpus.counts();
            for set in &n.sets {
                buf.clear();
                for &cell in set {
                    buf.extend(
                        counts
                            .row(cell)
                            .filter(|&(_, c)| c >= n.min_count)
                            .map(|(w, _)| w as u32),
                    );
                }
                emit(&mut buf, &mut f);
            }
        }
    }
    Ok(())
}

/// Context incidence tallies: number of contexts, per-term context counts,
/// and the symmetric pair counts (diagonal equals `df`).
#[derive(Debug, Clone)]
pub struct ContextCounts {
    pub contexts: u64,
    pub df: Vec<u64>,
    joint: Vec<u32>,
    v: usize,
}

impl ContextCounts {
    pub fn compute(corpus: &Corpus, strategy: &WindowStrategy) -> Result<Self> {
        let v = corpus.num_terms();
        let mut joint = vec![0u32; v * v];
        let mut df = vec![0u64; v];
        let mut contexts = 0u64;
        for_each_context(corpus, strategy, |ctx| {
            contexts += 1;
            for (a, &i) in ctx.iter().enumerate() {
                let i = i as usize;
                df[i] += 1;
                let row = &mut joint[i * v..(i + 1) * v];
                for &j in &ctx[a..] {
                    row[j as usize] += 1;
                }
            }
        })?;
        // mirror the upper triangle
        for i in 0..v {
            for j in (i + 1)..v {
                joint[j * v + i] = joint[i * v + j];
            }
        }
        Ok(ContextCounts { contexts, df, joint, v })
    }

    pub fn joint(&self, i: usize, j: usize) -> u64 {
        self.joint[i * self.v + j] as u64
    }

    pub fn num_terms(&self) -> usize {
        self.v
    }
}

/// Positive PMI over a context strategy.
#[derive(Debug, Clone)]
pub struct PpmiMatrix {
    pub m: DMatrix<f64>,
    pub window_count: u64,
    pub terms: Vec<String>,
}

/// `max(0, ln(p(i,j) / (p(i) p(j))))`; zero when the pair never shares a context.
pub fn ppmi_value(joint: u64, df_i: u64, df_j: u64, contexts: u64) -> f64 {
    if joint == 0 {
        return 0.0;
    }
    let pmi = ((joint as f64) * (contexts as f64) / ((df_i as f64) * (df_j as f64))).ln();
    pmi.max(0.0)
}

pub fn ppmi(corpus: &Corpus, strategy: &WindowStrategy) -> Result<PpmiMatrix> {
    let counts = ContextCounts::compute(corpus, strategy)?;
    ppmi_from_counts(&counts, corpus.vocab().terms())
}

pub fn ppmi_from_counts(counts: &ContextCounts, terms: &[String]) -> Result<PpmiMatrix> {
    let v = counts.num_terms();
    if let Some(w) = counts.df.iter().position(|&d| d == 0) {
        return Err(Error::Data(format!("term `{}` occurs in no context", terms[w])));
    }
    let mut rows = vec![0.0f64; v * v];
    rows.par_chunks_mut(v).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = ppmi_value(counts.joint(i, j), counts.df[i], counts.df[j], counts.contexts);
        }
    });
    Ok(PpmiMatrix {
        m: DMatrix::from_row_slice(v, v, &rows),
        window_count: counts.contexts,
        terms: terms.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    FirstOrderPpmi,
    SecondOrderCosine,
}

/// Symmetric nonnegative word–word weights with no all-zero row.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    pub w: DMatrix<f64>,
    pub kind: GraphKind,
    pub terms: Vec<String>,
    /// Terms whose row was all zero and received a unit self-loop.
    pub repaired: Vec<usize>,
}

impl SimilarityGraph {
    /// Wraps an arbitrary symmetric nonnegative matrix, repairing zero rows.
    pub fn from_weights(w: DMatrix<f64>, kind: GraphKind, terms: Vec<String>) -> Result<Self> {
        if !w.is_square() || w.nrows() != terms.len() {
            return Err(Error::Data(format!(
                "graph is {}x{} for {} terms",
                w.nrows(),
                w.ncols(),
                terms.len()
            )));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Data("graph weights must be finite and nonnegative".into()));
        }
        let mut g = SimilarityGraph {
            w,
            kind,
            terms,
            repaired: Vec::new(),
        };
        g.repair_zero_rows();
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }

    fn repair_zero_rows(&mut self) {
        for i in 0..self.w.nrows() {
            if self.w.row(i).iter().all(|&x| x == 0.0) {
                log::warn!("term `{}` has no associations; adding a self-loop", self.terms[i]);
                self.w[(i, i)] = 1.0;
                self.repaired.push(i);
            }
        }
    }
}

/// Cosine similarity between PPMI rows.
pub fn second_order_graph(ppmi: &PpmiMatrix) -> SimilarityGraph {
    let v = ppmi.m.nrows();
    let mut unit = ppmi.m.clone();
    let mut nonzero = vec![false; v];
    for (i, nz) in nonzero.iter_mut().enumerate() {
        let norm = unit.row(i).norm();
        if norm > 0.0 {
            unit.row_mut(i).scale_mut(1.0 / norm);
            *nz = true;
        }
    }
    let gram = &unit * unit.transpose();
    let mut w = DMatrix::zeros(v, v);
    for i in 0..v {
        if nonzero[i] {
            w[(i, i)] = 1.0;
        }
        for j in (i + 1)..v {
            let c = gram[(i, j)].clamp(0.0, 1.0);
            w[(i, j)] = c;
            w[(j, i)] = c;
        }
    }
    let mut g = SimilarityGraph {
        w,
        kind: GraphKind::SecondOrderCosine,
        terms: ppmi.terms.clone(),
        repaired: Vec::new(),
    };
    g.repair_zero_rows();
    g
}

/// The PPMI matrix itself as a graph (no cosine step).
pub fn first_order_graph(ppmi: &PpmiMatrix) -> SimilarityGraph {
    let mut g = SimilarityGraph {
        w: ppmi.m.clone(),
        kind: GraphKind::FirstOrderPpmi,
        terms: ppmi.terms.clone(),
        repaired: Vec::new(),
    };
    g.repair_zero_rows();
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn corpus(v: usize, docs: Vec<Vec<u32>>) -> Corpus {
        let vocab = Vocabulary::new((0..v).map(|i| ((b'a' + i as u8) as char).to_string()).collect()).unwrap();
        Corpus::new(vocab, docs, vec![]).unwrap()
    }

    #[test]
    fn ppmi_three_contexts() {
        let c = corpus(3, vec![vec![0, 1], vec![0, 1], vec![2]]);
        let p = ppmi(&c, &WindowStrategy::Document).unwrap();
        assert!((p.m[(0, 1)] - 1.5f64.ln()).abs() < 1e-15);
        assert!((p.m[(0, 1)] - 0.4055).abs() < 1e-4);
        assert_eq!(p.m[(0, 2)], 0.0);
        assert_eq!(p.window_count, 3);
        // diagonal: p(w,w) = p(w) gives ln(1/p(w))
        assert!((p.m[(2, 2)] - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ppmi_independent_pair_is_zero() {
        let c = corpus(3, vec![vec![0, 1], vec![0, 2]]);
        let p = ppmi(&c, &WindowStrategy::Document).unwrap();
        assert_eq!(p.m[(0, 1)], 0.0);
        assert_eq!(p.m[(1, 2)], 0.0);
    }

    #[test]
    fn presence_counting_ignores_multiplicity() {
        let a = corpus(3, vec![vec![0, 1], vec![0, 1], vec![2]]);
        let b = corpus(3, vec![vec![0, 0, 1, 0], vec![1, 0, 1], vec![2, 2]]);
        let pa = ppmi(&a, &WindowStrategy::Document).unwrap();
        let pb = ppmi(&b, &WindowStrategy::Document).unwrap();
        assert_eq!(pa.m, pb.m);
    }

    #[test]
    fn sliding_window_short_document_matches_document_strategy() {
        let c = corpus(4, vec![vec![0, 1, 2], vec![3, 1], vec![2, 3, 0]]);
        let d = ppmi(&c, &WindowStrategy::Document).unwrap();
        let s = ppmi(&c, &WindowStrategy::Sliding(5)).unwrap();
        assert_eq!(d.m, s.m);
        assert_eq!(d.window_count, s.window_count);
    }

    #[test]
    fn sliding_window_counts_overlapping_windows() {
        let c = corpus(4, vec![vec![0, 1, 2, 3]]);
        let mut seen = Vec::new();
        for_each_context(&c, &WindowStrategy::Sliding(2), |ctx| seen.push(ctx.to_vec())).unwrap();
        assert_eq!(seen, vec![vec![0, 1], vec![1, 2], vec![2, 3]]);
        assert!(WindowStrategy::Sliding(1).validate(&c).is_err());
    }

    #[test]
    fn neighborhood_contexts_union_member_cells() {
        let c = corpus(3, vec![vec![0], vec![1], vec![2, 2]]);
        let n = Neighborhoods::new(vec![vec![0, 1], vec![1, 0], vec![2, 1]]);
        let mut seen = Vec::new();
        for_each_context(&c, &WindowStrategy::Neighborhood(n.clone()), |ctx| {
            seen.push(ctx.to_vec())
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0, 1], vec![0, 1], vec![1, 2]]);

        let strict = Neighborhoods { min_count: 2, ..n };
        let mut seen = Vec::new();
        for_each_context(&c, &WindowStrategy::Neighborhood(strict), |ctx| seen.push(ctx.to_vec())).unwrap();
        assert_eq!(seen, vec![vec![2]]);

        let bad = Neighborhoods::new(vec![vec![1], vec![1], vec![2]]);
        assert!(WindowStrategy::Neighborhood(bad).validate(&c).is_err());
    }

    fn ppmi_of(rows: &[&[f64]]) -> PpmiMatrix {
        let v = rows.len();
        PpmiMatrix {
            m: DMatrix::from_fn(v, v, |i, j| rows[i][j]),
            window_count: 1,
            terms: (0..v).map(|i| format!("t{i}")).collect(),
        }
    }

    #[test]
    fn second_order_cosine_examples() {
        let p = ppmi_of(&[&[1.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        let g = second_order_graph(&p);
        assert!((g.w[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((g.w[(0, 2)] - 1.0).abs() < 1e-15);
        assert_eq!(g.w[(1, 1)], 1.0);

        let p = ppmi_of(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 0.0]]);
        let g = second_order_graph(&p);
        assert_eq!(g.w[(0, 1)], 0.0);
        assert_eq!(g.w[(2, 2)], 1.0);
        assert_eq!(g.repaired, vec![2]);
    }

    #[test]
    fn first_order_passthrough_and_repair() {
        let c = corpus(3, vec![vec![0, 1], vec![0, 1], vec![2]]);
        let p = ppmi(&c, &WindowStrategy::Document).unwrap();
        let g = first_order_graph(&p);
        assert_eq!(g.w, p.m);
        assert!((g.w[(0, 1)] - 1.5f64.ln()).abs() < 1e-15);
        assert!(g.repaired.is_empty());

        let zeros = ppmi_of(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let g = first_order_graph(&zeros);
        assert_eq!(g.w, DMatrix::identity(2, 2));
        assert_eq!(g.repaired, vec![0, 1]);
    }
}
