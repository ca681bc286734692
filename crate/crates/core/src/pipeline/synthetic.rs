use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};

/// Parameters of the planted-topic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub k: usize,
    pub v: usize,
    pub docs: usize,
    pub doc_len: usize,
    /// Symmetric document–topic concentration.
    pub alpha: f64,
    /// Fraction of the vocabulary each topic puts mass on.
    pub topic_sparsity: f64,
    /// Symmetric Dirichlet concentration of φ* on its support.
    pub phi_concentration: f64,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn new(k: usize, v: usize, docs: usize, doc_len: usize, seed: u64) -> Self {
        SyntheticParams {
            k,
            v,
            docs,
            doc_len,
            alpha: 0.2,
            topic_sparsity: 1.0 / k.max(1) as f64,
            phi_concentration: 1.0,
            seed,
        }
    }

    /// Support length per topic.
    pub fn support(&self) -> usize {
        (self.topic_sparsity * self.v as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.v < 2 || self.docs == 0 || self.doc_len == 0 {
            return Err(Error::Config(
                "synthetic K, V, D and doc_len must be positive (V >= 2)".into(),
            ));
        }
        if !(self.alpha > 0.0) || !(self.phi_concentration > 0.0) {
            return Err(Error::Config("synthetic concentrations must be positive".into()));
        }
        if !(self.topic_sparsity > 0.0 && self.topic_sparsity <= 1.0) {
            return Err(Error::Config(format!(
                "topic_sparsity must be in (0, 1], got {}",
                self.topic_sparsity
            )));
        }
        if self.topic_sparsity * (self.v as f64) < 1.0 || self.support() == 0 {
            return Err(Error::Config("topic_sparsity * V must be at least 1".into()));
        }
        Ok(())
    }
}

/// A generated corpus with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// K × V' planted topics over the corpus vocabulary (terms that never
    /// occurred are dropped and rows renormalized).
    pub phi: DMatrix<f64>,
    /// D × K planted document mixtures.
    pub theta: DMatrix<f64>,
    /// Planted topic of every token, aligned with the corpus documents.
    pub z: Vec<Vec<u32>>,
}

fn dirichlet(rng: &mut impl Rng, conc: f64, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(conc, 1.0).expect("positive shape");
    let mut x: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let mut s: f64 = x.iter().sum();
    if !(s > 0.0) {
        // all draws underflowed: fall back to one uniformly chosen vertex
        x.iter_mut().for_each(|v| *v = 0.0);
        x[rng.random_range(0..n)] = 1.0;
        s = 1.0;
    }
    x.iter_mut().for_each(|v| *v /= s);
    x
}

fn draw(rng: &mut impl Rng, cdf: &[f64]) -> usize {
    let u = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Draws a corpus from the LDA generative process.
///
/// Topic `k` puts Dirichlet(`phi_concentration`) mass on the
/// `round(topic_sparsity · V)` consecutive words starting at `k·V/K`
/// (wrapping around), so supports are disjoint when `topic_sparsity = 1/K`
/// and overlap otherwise.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<SyntheticCorpus> {
    params.validate()?;
    let SyntheticParams {
        k, v, docs, doc_len, ..
    } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let len = params.support();

    let mut phi = DMatrix::zeros(k, v);
    for t in 0..k {
        let start = t * v / k;
        let weights = dirichlet(&mut rng, params.phi_concentration, len);
        for (j, w) in weights.into_iter().enumerate() {
            phi[(t, (start + j) % v)] += w;
        }
    }
    let phi_cdf: Vec<Vec<f64>> = (0..k)
        .map(|t| cumulative(&phi.row(t).iter().copied().collect::<Vec<_>>()))
        .collect();

    let mut theta = DMatrix::zeros(docs, k);
    let mut tokens = Vec::with_capacity(docs);
    let mut z = Vec::with_capacity(docs);
    for d in 0..docs {
        let th = if k == 1 {
            vec![1.0]
        } else {
            dirichlet(&mut rng, params.alpha, k)
        };
        let th_cdf = cumulative(&th);
        for (t, x) in th.iter().enumerate() {
            theta[(d, t)] = *x;
        }
        let mut doc = Vec::with_capacity(doc_len);
        let mut zd = Vec::with_capacity(doc_len);
        for _ in 0..doc_len {
            let t = draw(&mut rng, &th_cdf);
            doc.push(draw(&mut rng, &phi_cdf[t]) as u32);
            zd.push(t as u32);
        }
        tokens.push(doc);
        z.push(zd);
    }

    let width = (v - 1).to_string().len();
    let terms: Vec<String> = (0..v).map(|i| format!("w{i:0width$}")).collect();
    let mut used = vec![false; v];
    for w in tokens.iter().flatten() {
        used[*w as usize] = true;
    }
    let corpus = Corpus::new(Vocabulary::new(terms)?, tokens, vec![])?;
    let kept: Vec<usize> = (0..v).filter(|&w| used[w]).collect();
    let mut phi_kept = DMatrix::from_fn(k, kept.len(), |t, j| phi[(t, kept[j])]);
    for mut row in phi_kept.row_iter_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    Ok(SyntheticCorpus {
        corpus,
        phi: phi_kept,
        theta,
        z,
    })
}

/// Greedy one-to-one matching of estimated to planted topics by cosine
/// similarity of their rows; returns the mean matched cosine.
pub fn matched_cosine(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.ncols() != truth.ncols() {
        return Err(Error::Data(format!(
            "topic matrices over {} and {} terms",
            estimate.ncols(),
            truth.ncols()
        )));
    }
    let cos = |a: usize, b: usize| {
        let x = estimate.row(a);
        let y = truth.row(b);
        let n = x.norm() * y.norm();
        if n > 0.0 {
            x.dot(&y) / n
        } else {
            0.0
        }
    };
    let mut pairs: Vec<(f64, usize, usize)> = (0..estimate.nrows())
        .flat_map(|a| (0..truth.nrows()).map(move |b| (a, b)))
        .map(|(a, b)| (cos(a, b), a, b))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; estimate.nrows()];
    let mut used_b = vec![false; truth.nrows()];
    let mut total = 0.0;
    let mut matched = 0;
    for (c, a, b) in pairs {
        if !used_a[a] && !used_b[b] {
            used_a[a] = true;
            used_b[b] = true;
            total += c;
            matched += 1;
        }
    }
    Ok(if matched == 0 { 0.0 } else { total / matched as f64 })
}
