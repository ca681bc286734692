//! From word embeddings to a vector-valued Dirichlet topic–word prior.
//!
//! 1. A diagonal GMM softly clusters the embedded words, giving `p(z | w)`.
//! 2. Bayes' rule with the unigram `p(w)` gives topic–word rows
//!    `p(w | z) ∝ p(z | w) p(w)`, renormalized per topic.
//! 3. The K rows are treated as samples on the simplex and the Dirichlet
//!    parameter is fitted per coordinate by the method of moments:
//!    `β_i = μ_i (μ_i (1 − μ_i) / s²_i − 1)`, with `s²_i` the unbiased
//!    variance over the K rows.

mod gmm;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{UnigramDistribution, Vocabulary};
use crate::error::{Error, Result};

pub use gmm::{fit_gmm, fit_gmm_with, GmmConfig, GmmModel};

pub const BETA_FLOOR: f64 = 1e-4;
pub const BETA_CAP: f64 = 1e4;
/// Below this sample variance a coordinate gets `BETA_FLOOR`.
pub const MIN_VARIANCE: f64 = 1e-12;
/// Minimum fraction of vocabulary terms an external embedding must cover.
pub const MIN_EMBEDDING_COVERAGE: f64 = 0.9;

/// K × V matrix whose rows are `p(w | z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicWordMatrix {
    pub x: DMatrix<f64>,
}

impl TopicWordMatrix {
    pub fn topics(&self) -> usize {
        self.x.nrows()
    }

    pub fn terms(&self) -> usize {
        self.x.ncols()
    }
}

/// Strictly positive Dirichlet parameter over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParam {
    beta: Vec<f64>,
}

impl DirichletParam {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::Data("empty Dirichlet parameter".into()));
        }
        if let Some(i) = beta.iter().position(|b| !b.is_finite() || *b <= 0.0) {
            return Err(Error::Data(format!(
                "beta[{i}] = {} is not a positive finite number",
                beta[i]
            )));
        }
        Ok(DirichletParam { beta })
    }

    /// Constant vector, the classic symmetric prior.
    pub fn symmetric(v: usize, value: f64) -> Result<Self> {
        DirichletParam::new(vec![value; v])
    }

    pub fn values(&self) -> &[f64] {
        &self.beta
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        DirichletParam::new(self.beta.iter().map(|b| b * factor).collect())
    }

    /// One value per line in vocabulary order, shortest round-trip decimal.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for b in &self.beta {
            writeln!(w, "{b}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut beta = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            beta.push(
                line.parse::<f64>()
                    .map_err(|e| Error::parse(path, i + 1, e.to_string()))?,
            );
        }
        DirichletParam::new(beta)
    }
}

/// Bayes inversion of soft assignments: row `z` is `p(z|w) p(w)` normalized over `w`.
pub fn invert_responsibilities(resp: &DMatrix<f64>, unigram: &UnigramDistribution) -> Result<TopicWordMatrix> {
    let (v, k) = resp.shape();
    if v != unigram.len() {
        return Err(Error::Data(format!(
            "{v} responsibility rows but a unigram over {} terms",
            unigram.len()
        )));
    }
    let p = unigram.probs();
    let mut x = DMatrix::from_fn(k, v, |z, w| resp[(w, z)] * p[w]);
    for z in 0..k {
        let mass = x.row(z).sum();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Numerical(format!(
                "topic {z} has zero total mass after Bayes inversion"
            )));
        }
        x.row_mut(z).scale_mut(1.0 / mass);
    }
    Ok(TopicWordMatrix { x })
}

pub fn invert_to_topic_word(gmm: &GmmModel, unigram: &UnigramDistribution) -> Result<TopicWordMatrix> {
    invert_responsibilities(&gmm.responsibilities, unigram)
}

/// Per-coordinate method-of-moments fit treating each row of `samples` as
/// one draw from the Dirichlet. Results are clamped into
/// `[BETA_FLOOR, BETA_CAP]`; coordinates with (near) zero variance or a
/// non-positive estimate get `BETA_FLOOR`.
pub fn estimate_beta_from_samples(samples: &DMatrix<f64>) -> Result<DirichletParam> {
    let (k, v) = samples.shape();
    if k < 2 {
        return Err(Error::Config(format!(
            "moment estimation needs at least 2 samples, got {k}"
        )));
    }
    let kf = k as f64;
    let beta = (0..v)
        .map(|i| {
            let col = samples.column(i);
            let mean = col.sum() / kf;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (kf - 1.0);
            if var < MIN_VARIANCE {
                return BETA_FLOOR;
            }
            let b = mean * (mean * (1.0 - mean) / var - 1.0);
            if !b.is_finite() || b <= 0.0 {
                BETA_FLOOR
            } else {
                b.clamp(BETA_FLOOR, BETA_CAP)
            }
        })
        .collect();
    DirichletParam::new(beta)
}

pub fn estimate_beta(x: &TopicWordMatrix) -> Result<DirichletParam> {
    estimate_beta_from_samples(&x.x)
}

/// I.i.d. uniform entries on `[BETA_FLOOR, 1]`.
pub fn random_prior(v: usize, seed: u64) -> Result<DirichletParam> {
    if v < 2 {
        return Err(Error::Config(format!("random prior needs V >= 2, got {v}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DirichletParam::new((0..v).map(|_| rng.random_range(BETA_FLOOR..=1.0)).collect())
}

/// Everything the embedding → prior stages produce.
#[derive(Debug, Clone)]
pub struct PriorFit {
    pub gmm: GmmModel,
    pub topic_word: TopicWordMatrix,
    pub beta: DirichletParam,
}

/// GMM → Bayes inversion → method of moments on embedded words.
pub fn prior_from_embedding(
    coords: &DMatrix<f64>,
    unigram: &UnigramDistribution,
    k: usize,
    seed: u64,
) -> Result<PriorFit> {
    let gmm = fit_gmm(coords, k, seed)?;
    let topic_word = invert_to_topic_word(&gmm, unigram)?;
    let beta = estimate_beta(&topic_word)?;
    Ok(PriorFit { gmm, topic_word, beta })
}

/// Reads `term v1 … vd` lines and aligns them to `vocab`.
///
/// All vectors must share one dimension `d >= 2`, checked before any fitting.
/// Terms without a vector receive the mean of the found vectors. Fails when
/// fewer than 90% of the vocabulary terms are covered.
pub fn load_external_embedding(path: &Path, vocab: &Vocabulary) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dim = None;
    let mut found: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(term) = fields.next() else { continue };
        let vec = fields
            .map(|f| f.parse::<f64>().map_err(|e| Error::parse(path, i + 1, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        match dim {
            None => dim = Some(vec.len()),
            Some(d) if d != vec.len() => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("vector has {} dimensions, expected {d}", vec.len()),
                ))
            }
            _ => {}
        }
        if let Some(id) = vocab.id(term) {
            found[id] = Some(vec);
        }
    }
    let d = dim.unwrap_or(0);
    if d < 2 {
        return Err(Error::Data(format!(
            "{}: word vectors need at least 2 dimensions",
            path.display()
        )));
    }
    let hits = found.iter().filter(|f| f.is_some()).count();
    let coverage = hits as f64 / vocab.len() as f64;
    if coverage < MIN_EMBEDDING_COVERAGE {
        return Err(Error::Data(format!(
            "{} covers {hits} of {} vocabulary terms ({:.1}%, need 90%)",
            path.display(),
            vocab.len(),
            100.0 * coverage
        )));
    }
    let mut mean = vec![0.0; d];
    for v in found.iter().flatten() {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / hits as f64;
        }
    }
    for (id, f) in found.iter().enumerate() {
        if f.is_none() {
            log::warn!("no external vector for `{}`; using the mean vector", vocab.term(id));
        }
    }
    Ok(DMatrix::from_fn(vocab.len(), d, |i, j| {
        found[i].as_ref().map_or(mean[j], |v| v[j])
    }))
}

pub fn external_embedding_prior(
    embedding_file: &Path,
    vocab: &Vocabulary,
    unigram: &UnigramDistribution,
    k: usize,
    seed: u64,
) -> Result<DirichletParam> {
    let coords = load_external_embedding(embedding_file, vocab)?;
    Ok(prior_from_embedding(&coords, unigram, k, seed)?.beta)
}
