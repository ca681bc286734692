//! Collapsed Gibbs sampling for LDA with a per-word topic–word prior.
//!
//! Each token is resampled from
//! `p(z = k) ∝ (n_dk + α_k) (n_kw + β_w) / (n_k + Σβ)`
//! with its own assignment removed from the counts. β is held fixed unless
//! [`LdaConfig::optimize_beta_scale`] is set, in which case only a scalar
//! multiplier on β is re-estimated.

mod hyper;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::prior::DirichletParam;

pub use hyper::{concentration_step, minka_step, minka_step_symmetric, MIN_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMode {
    Asymmetric,
    Symmetric,
}

#[derive(Debug, Clone)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: Vec<f64>,
    pub beta: DirichletParam,
    pub iterations: usize,
    pub burn_in: usize,
    /// Sweeps between α updates after burn-in; 0 disables.
    pub optimize_interval: usize,
    pub seed: u64,
    pub alpha_mode: AlphaMode,
    /// Re-estimate a scalar `s` in `β = s · β̂` alongside α.
    pub optimize_beta_scale: bool,
    /// Average φ and θ over post-burn-in sweeps instead of using the final state.
    pub average_samples: bool,
}

impl LdaConfig {
    /// MALLET-like defaults: 1000 sweeps, 200 burn-in, α updates every 10
    /// sweeps, symmetric initial α with Σα = 5.
    pub fn new(k: usize, beta: DirichletParam, seed: u64) -> Self {
        LdaConfig {
            k,
            alpha: vec![5.0 / k.max(1) as f64; k],
            beta,
            iterations: 1000,
            burn_in: 200,
            optimize_interval: 10,
            seed,
            alpha_mode: AlphaMode::Asymmetric,
            optimize_beta_scale: false,
            average_samples: false,
        }
    }

    pub fn with_symmetric_alpha(mut self, value: f64) -> Self {
        self.alpha = vec![value; self.k];
        self
    }

    pub fn validate(&self, num_terms: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.alpha.len() != self.k {
            return Err(Error::Config(format!(
                "alpha has {} entries for K = {}",
                self.alpha.len(),
                self.k
            )));
        }
        if let Some(a) = self.alpha.iter().find(|a| !a.is_finite() || **a <= 0.0) {
            return Err(Error::Config(format!("alpha entries must be positive, got {a}")));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.beta.len() != num_terms {
            return Err(Error::Config(format!(
                "beta has {} entries but the vocabulary has {num_terms} terms",
                self.beta.len()
            )));
        }
        Ok(())
    }
}

/// Topic assignments and the count tables they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaState {
    pub z: Vec<Vec<u32>>,
    k: usize,
    v: usize,
    ndk: Vec<u32>,
    nkw: Vec<u32>,
    nk: Vec<u64>,
}

impl LdaState {
    /// Builds the tallies for given assignments.
    pub fn from_assignments(corpus: &Corpus, z: Vec<Vec<u32>>, k: usize) -> Result<Self> {
        let v = corpus.num_terms();
        if z.len() != corpus.num_docs() {
            return Err(Error::Data(format!(
                "{} assignment rows for {} documents",
                z.len(),
                corpus.num_docs()
            )));
        }
        let mut state = LdaState {
            z: Vec::new(),
            k,
            v,
            ndk: vec![0; corpus.num_docs() * k],
            nkw: vec![0; k * v],
            nk: vec![0; k],
        };
        for (d, (doc, zd)) in corpus.docs().iter().zip(&z).enumerate() {
            if doc.len() != zd.len() {
                return Err(Error::Data(format!(
                    "document {d}: {} assignments for {} tokens",
                    zd.len(),
                    doc.len()
                )));
            }
            for (&w, &t) in doc.iter().zip(zd) {
                if t as usize >= k {
                    return Err(Error::Data(format!("document {d}: topic {t} out of range for K = {k}")));
                }
                state.add(d, w as usize, t as usize);
            }
        }
        state.z = z;
        Ok(state)
    }

    fn random(corpus: &Corpus, k: usize, rng: &mut impl Rng) -> Self {
        let z = corpus
            .docs()
            .iter()
            .map(|doc| doc.iter().map(|_| rng.random_range(0..k as u32)).collect())
            .collect();
        LdaState::from_assignments(corpus, z, k).expect("random assignments are in range")
    }

    fn add(&mut self, d: usize, w: usize, t: usize) {
        self.ndk[d * self.k + t] += 1;
        self.nkw[t * self.v + w] += 1;
        self.nk[t] += 1;
    }

    fn remove(&mut self, d: usize, w: usize, t: usize) {
        self.ndk[d * self.k + t] -= 1;
        self.nkw[t * self.v + w] -= 1;
        self.nk[t] -= 1;
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn ndk(&self, d: usize, t: usize) -> u32 {
        self.ndk[d * self.k + t]
    }

    pub fn nkw(&self, t: usize, w: usize) -> u32 {
        self.nkw[t * self.v + w]
    }

    pub fn nk(&self) -> &[u64] {
        &self.nk
    }

    /// Row-major D × K table.
    pub fn doc_topic_counts(&self) -> &[u32] {
        &self.ndk
    }

    /// Row-major K × V table.
    pub fn topic_word_counts(&self) -> &[u32] {
        &self.nkw
    }

    pub fn doc_lengths(&self) -> Vec<u32> {
        self.z.iter().map(|zd| zd.len() as u32).collect()
    }

    /// True when the stored tallies equal those rebuilt from `z`.
    pub fn is_consistent(&self, corpus: &Corpus) -> bool {
        LdaState::from_assignments(corpus, self.z.clone(), self.k)
            .is_ok_and(|fresh| fresh.ndk == self.ndk && fresh.nkw == self.nkw && fresh.nk == self.nk)
    }
}

/// One α fixed-point step; see [`minka_step`].
pub fn optimize_alpha(state: &LdaState, alpha: &[f64], doc_lengths: &[u32]) -> Vec<f64> {
    minka_step(&state.ndk, state.k, alpha, doc_lengths)
}

/// `log p(w, z | α, β)` with θ and φ integrated out.
pub fn log_joint(state: &LdaState, alpha: &[f64], beta: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let b0: f64 = beta.iter().sum();
    let lg_alpha: Vec<f64> = alpha.iter().map(|&a| ln_gamma(a)).collect();
    let lg_beta: Vec<f64> = beta.iter().map(|&b| ln_gamma(b)).collect();
    let mut total = 0.0;
    for (d, zd) in state.z.iter().enumerate() {
        total += ln_gamma(a0) - ln_gamma(zd.len() as f64 + a0);
        for t in 0..state.k {
            let c = state.ndk(d, t);
            if c > 0 {
                total += ln_gamma(c as f64 + alpha[t]) - lg_alpha[t];
            }
        }
    }
    for t in 0..state.k {
        total += ln_gamma(b0) - ln_gamma(state.nk[t] as f64 + b0);
        for (w, lb) in lg_beta.iter().enumerate() {
            let c = state.nkw(t, w);
            if c > 0 {
                total += ln_gamma(c as f64 + beta[w]) - lb;
            }
        }
    }
    total
}

/// Point estimates from a trained chain.
#[derive(Debug, Clone)]
pub struct TopicModel {
    /// K × V, rows sum to 1.
    pub phi: DMatrix<f64>,
    /// D × K, rows sum to 1.
    pub theta: DMatrix<f64>,
    pub alpha: Vec<f64>,
    /// The β in effect at the end of sampling.
    pub beta: Vec<f64>,
    pub terms: Vec<String>,
    pub log_joint: f64,
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.phi.nrows()
    }

    /// Term ids per topic by φ descending, ties by lower id.
    pub fn top_words(&self, n: usize) -> Vec<Vec<usize>> {
        (0..self.phi.nrows())
            .map(|t| {
                let row = self.phi.row(t);
                let mut ids: Vec<usize> = (0..row.len()).collect();
                ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                ids.truncate(n);
                ids
            })
            .collect()
    }

    pub fn top_terms(&self, n: usize) -> Vec<Vec<String>> {
        self.top_words(n)
            .into_iter()
            .map(|ids| ids.into_iter().map(|w| self.terms[w].clone()).collect())
            .collect()
    }

    /// One line per topic: `id<TAB>term:φ<TAB>term:φ…`.
    pub fn write_topics(&self, path: &Path, n: usize) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (t, ids) in self.top_words(n).iter().enumerate() {
            let cells: Vec<String> = ids
                .iter()
                .map(|&w| format!("{}:{:.6}", self.terms[w], self.phi[(t, w)]))
                .collect();
            writeln!(out, "{t}\t{}", cells.join("\t")).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads `id<TAB>term:φ…` topic files back into term lists.
pub fn read_topics(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut topics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        fields.next();
        let terms = fields
            .map(|f| match f.rsplit_once(':') {
                Some((term, _)) => Ok(term.to_string()),
                None => Err(Error::parse(path, i + 1, format!("expected term:value, got `{f}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        topics.push(terms);
    }
    Ok(topics)
}

/// A single Gibbs chain over a borrowed corpus.
pub struct Gibbs<'a> {
    corpus: &'a Corpus,
    config: LdaConfig,
    state: LdaState,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    beta_sum: f64,
    beta_scale: f64,
    rng: ChaCha8Rng,
    sweeps: usize,
    weights: Vec<f64>,
    phi_sum: Option<DMatrix<f64>>,
    theta_sum: Option<DMatrix<f64>>,
    samples: usize,
}

impl<'a> Gibbs<'a> {
    /// Validates the config and draws the initial assignments uniformly.
    pub fn new(corpus: &'a Corpus, config: LdaConfig) -> Result<Self> {
        config.validate(corpus.num_terms())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let state = LdaState::random(corpus, config.k, &mut rng);
        let beta = config.beta.values().to_vec();
        Ok(Gibbs {
            corpus,
            alpha: config.alpha.clone(),
            beta_sum: beta.iter().sum(),
            beta,
            beta_scale: 1.0,
            rng,
            sweeps: 0,
            weights: vec![0.0; config.k],
            phi_sum: None,
            theta_sum: None,
            samples: 0,
            state,
            config,
        })
    }

    pub fn state(&self) -> &LdaState {
        &self.state
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_scale(&self) -> f64 {
        self.beta_scale
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Normalized full conditional of token `n` in document `d`, excluding
    /// the token's own assignment.
    pub fn conditional(&self, d: usize, n: usize) -> Vec<f64> {
        let w = self.corpus.doc(d)[n] as usize;
        let own = self.state.z[d][n] as usize;
        let s = &self.state;
        let mut p: Vec<f64> = (0..s.k)
            .map(|t| {
                let mine = u32::from(t == own);
                let ndk = (s.ndk(d, t) - mine) as f64;
                let nkw = (s.nkw(t, w) - mine) as f64;
                let nk = (s.nk[t] - mine as u64) as f64;
                (ndk + self.alpha[t]) * (nkw + self.beta[w]) / (nk + self.beta_sum)
            })
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// Resamples one token in place.
    pub fn resample_token(&mut self, d: usize, n: usize) -> Result<()> {
        let w = self.corpus.doc(d)[n] as usize;
        let old = self.state.z[d][n] as usize;
        self.state.remove(d, w, old);
        let k = self.state.k;
        let mut total = 0.0;
        for t in 0..k {
            let p = (self.state.ndk[d * k + t] as f64 + self.alpha[t])
                * (self.state.nkw[t * self.state.v + w] as f64 + self.beta[w])
                / (self.state.nk[t] as f64 + self.beta_sum);
            total += p;
            self.weights[t] = total;
        }
        if !total.is_finite() || total <= 0.0 {
            self.state.add(d, w, old);
            return Err(Error::Numerical(format!(
                "non-finite sampling weights at document {d}, token {n} (word {w})"
            )));
        }
        let u = self.rng.random::<f64>() * total;
        let new = self.weights.partition_point(|&c| c <= u).min(k - 1);
        self.state.add(d, w, new);
        self.state.z[d][n] = new as u32;
        Ok(())
    }

    /// One pass over every token, followed by any scheduled hyperparameter update.
    pub fn sweep(&mut self) -> Result<()> {
        for d in 0..self.corpus.num_docs() {
            for n in 0..self.corpus.doc(d).len() {
                self.resample_token(d, n)?;
            }
        }
        debug_assert!(self.state.is_consistent(self.corpus));
        self.sweeps += 1;

        let past_burn_in = self.sweeps > self.config.burn_in;
        let interval = self.config.optimize_interval;
        if past_burn_in && interval > 0 && (self.sweeps - self.config.burn_in) % interval == 0 {
            self.update_hyperparameters();
        }
        if past_burn_in && self.config.average_samples {
            self.accumulate();
        }
        Ok(())
    }

    fn update_hyperparameters(&mut self) {
        let lengths = self.state.doc_lengths();
        self.alpha = match self.config.alpha_mode {
            AlphaMode::Asymmetric => optimize_alpha(&self.state, &self.alpha, &lengths),
            AlphaMode::Symmetric => {
                let a = minka_step_symmetric(&self.state.ndk, self.state.k, self.alpha[0], &lengths);
                vec![a; self.state.k]
            }
        };
        if self.config.optimize_beta_scale {
            let base = self.config.beta.values();
            self.beta_scale = concentration_step(&self.state.nkw, &self.state.nk, base, self.beta_scale);
            self.beta = base.iter().map(|b| b * self.beta_scale).collect();
            self.beta_sum = self.beta.iter().sum();
        }
    }

    fn accumulate(&mut self) {
        let (phi, theta) = self.estimates();
        match (&mut self.phi_sum, &mut self.theta_sum) {
            (Some(p), Some(t)) => {
                *p += phi;
                *t += theta;
            }
            _ => {
                self.phi_sum = Some(phi);
                self.theta_sum = Some(theta);
            }
        }
        self.samples += 1;
    }

    fn estimates(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let s = &self.state;
        let phi = DMatrix::from_fn(s.k, s.v, |t, w| {
            (s.nkw(t, w) as f64 + self.beta[w]) / (s.nk[t] as f64 + self.beta_sum)
        });
        let a0: f64 = self.alpha.iter().sum();
        let theta = DMatrix::from_fn(s.z.len(), s.k, |d, t| {
            (s.ndk(d, t) as f64 + self.alpha[t]) / (s.z[d].len() as f64 + a0)
        });
        (phi, theta)
    }

    /// Runs the remaining sweeps up to `config.iterations`.
    pub fn run(&mut self) -> Result<()> {
        while self.sweeps < self.config.iterations {
            self.sweep()?;
            if self.sweeps % 100 == 0 {
                log::debug!("sweep {}: log joint {:.3}", self.sweeps, self.log_joint());
            }
        }
        Ok(())
    }

    pub fn log_joint(&self) -> f64 {
        log_joint(&self.state, &self.alpha, &self.beta)
    }

    pub fn model(&self) -> TopicModel {
        let (phi, theta) = match (&self.phi_sum, &self.theta_sum) {
            (Some(p), Some(t)) if self.samples > 0 => (p / self.samples as f64, t / self.samples as f64),
            _ => self.estimates(),
        };
        TopicModel {
            phi,
            theta,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            terms: self.corpus.vocab().terms().to_vec(),
            log_joint: self.log_joint(),
        }
    }
}

pub fn train(corpus: &Corpus, config: LdaConfig) -> Result<TopicModel> {
    let mut chain = Gibbs::new(corpus, config)?;
    chain.run()?;
    Ok(chain.model())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn corpus(v: usize, docs: Vec<Vec<u32>>) -> Corpus {
        Corpus::new(
            Vocabulary::new((0..v).map(|i| format!("w{i}")).collect()).unwrap(),
            docs,
            vec![],
        )
        .unwrap()
    }

    fn config(k: usize, v: usize, a: f64, b: f64, seed: u64) -> LdaConfig {
        let mut c = LdaConfig::new(k, DirichletParam::symmetric(v, b).unwrap(), seed).with_symmetric_alpha(a);
        c.iterations = 50;
        c.burn_in = 10;
        c.optimize_interval = 0;
        c
    }

    #[test]
    fn single_topic_is_smoothed_frequency() {
        let c = corpus(3, vec![vec![0, 0, 1], vec![2, 0]]);
        let m = train(&c, config(1, 3, 0.5, 0.1, 1)).unwrap();
        let expect = [3.1 / 5.3, 1.1 / 5.3, 1.1 / 5.3];
        for w in 0..3 {
            assert!((m.phi[(0, w)] - expect[w]).abs() < 1e-12);
        }
        assert!(m.theta.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn two_token_chain_matches_enumeration() {
        // doc0 = [w0], doc1 = [w1], K = 2, α = 1, β = 0.5
        // posterior: same topic ∝ 2b/(2b+1) = 1/2, different topics ∝ 1
        let c = corpus(2, vec![vec![0], vec![1]]);
        let mut cfg = config(2, 2, 1.0, 0.5, 11);
        cfg.iterations = 100_001;
        cfg.burn_in = 1;
        let mut chain = Gibbs::new(&c, cfg).unwrap();

        // full conditional of doc0's token when doc1 sits in topic 0
        chain.state = LdaState::from_assignments(&c, vec![vec![1], vec![0]], 2).unwrap();
        let p = chain.conditional(0, 0);
        // p(z0 = 0) ∝ α·b/(1 + 2b) = 0.25, p(z0 = 1) ∝ α·b/(0 + 2b) = 0.5
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-12);

        let mut freq = [0usize; 4];
        for _ in 0..100_000 {
            chain.sweep().unwrap();
            let z = &chain.state().z;
            freq[(z[0][0] * 2 + z[1][0]) as usize] += 1;
        }
        let truth = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
        for (f, t) in freq.iter().zip(truth) {
            let emp = *f as f64 / 100_000.0;
            assert!((emp - t).abs() / t < 0.02, "{freq:?}");
        }
    }

    #[test]
    fn counts_stay_consistent_and_chain_is_deterministic() {
        let c = corpus(6, vec![vec![0, 1, 2, 0], vec![3, 4, 5, 5, 4], vec![0, 5, 2]]);
        let mut a = Gibbs::new(&c, config(3, 6, 0.3, 0.1, 5)).unwrap();
        let mut b = Gibbs::new(&c, config(3, 6, 0.3, 0.1, 5)).unwrap();
        for _ in 0..30 {
            a.sweep().unwrap();
            b.sweep().unwrap();
            assert!(a.state().is_consistent(&c));
            assert_eq!(a.state(), b.state());
        }
        let total: u64 = a.state().nk().iter().sum();
        assert_eq!(total, c.total_tokens());
    }

    #[test]
    fn constant_vector_beta_is_the_symmetric_formula() {
        let c = corpus(4, vec![vec![0, 1, 2, 3, 1], vec![3, 3, 2]]);
        let chain = Gibbs::new(&c, config(2, 4, 0.4, 0.2, 3)).unwrap();
        let s = chain.state();
        for d in 0..2 {
            for n in 0..c.doc(d).len() {
                let w = c.doc(d)[n] as usize;
                let own = s.z[d][n] as usize;
                let raw: Vec<f64> = (0..2)
                    .map(|t| {
                        let m = u32::from(t == own);
                        ((s.ndk(d, t) - m) as f64 + 0.4) * ((s.nkw(t, w) - m) as f64 + 0.2)
                            / ((s.nk()[t] - m as u64) as f64 + 4.0 * 0.2)
                    })
                    .collect();
                let z: f64 = raw.iter().sum();
                for (p, r) in chain.conditional(d, n).iter().zip(&raw) {
                    assert!((p - r / z).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn log_joint_single_topic_closed_form() {
        // K = 1: Dirichlet-multinomial marginal of all tokens plus a trivial doc term
        let c = corpus(2, vec![vec![0, 0, 1]]);
        let s = LdaState::from_assignments(&c, vec![vec![0, 0, 0]], 1).unwrap();
        let (a, b) = (0.7f64, 0.3f64);
        // doc: Γ(a)/Γ(3+a) · Γ(3+a)/Γ(a) = 1
        // topic: Γ(2b)/Γ(3+2b) · Γ(2+b)/Γ(b) · Γ(1+b)/Γ(b)
        let expect = (b * (1.0 + b) * b / (2.0 * b * (2.0 * b + 1.0) * (2.0 * b + 2.0))).ln();
        let got = log_joint(&s, &[a], &[b, b]);
        assert!((got - expect).abs() < 1e-12);
        assert_eq!(got.to_bits(), log_joint(&s, &[a], &[b, b]).to_bits());
    }

    #[test]
    fn incremental_log_joint_delta() {
        let c = corpus(5, vec![vec![0, 1, 2, 3], vec![4, 4, 1], vec![2, 3, 0, 0, 1]]);
        let mut chain = Gibbs::new(&c, config(3, 5, 0.5, 0.05, 9)).unwrap();
        for step in 0..40 {
            let (d, n) = (step % 3, step % c.doc(step % 3).len());
            let before = chain.state().clone();
            let lj_before = chain.log_joint();
            chain.resample_token(d, n).unwrap();
            let delta = chain.log_joint() - lj_before;
            let t_old = before.z[d][n] as usize;
            let t_new = chain.state().z[d][n] as usize;
            // direct delta from the changed counts only
            let w = c.doc(d)[n] as usize;
            let alpha = chain.alpha().to_vec();
            let beta = chain.beta().to_vec();
            let b0: f64 = beta.iter().sum();
            let expect = if t_old == t_new {
                0.0
            } else {
                let nd_old = before.ndk(d, t_old) as f64;
                let nd_new = before.ndk(d, t_new) as f64;
                let nw_old = before.nkw(t_old, w) as f64;
                let nw_new = before.nkw(t_new, w) as f64;
                let nk_old = before.nk()[t_old] as f64;
                let nk_new = before.nk()[t_new] as f64;
                (nd_new + alpha[t_new]).ln() - (nd_old - 1.0 + alpha[t_old]).ln() + (nw_new + beta[w]).ln()
                    - (nw_old - 1.0 + beta[w]).ln()
                    - (nk_new + b0).ln()
                    + (nk_old - 1.0 + b0).ln()
            };
            assert!((delta - expect).abs() < 1e-9, "step {step}: {delta} vs {expect}");
        }
    }

    #[test]
    fn prior_monotonicity_at_fixed_state() {
        let c = corpus(3, vec![vec![0, 1, 2, 2]]);
        let low = Gibbs::new(&c, config(2, 3, 0.5, 0.1, 2)).unwrap();
        let mut cfg = config(2, 3, 0.5, 0.1, 2);
        cfg.beta = DirichletParam::new(vec![0.1, 0.9, 0.1]).unwrap();
        let high = Gibbs::new(&c, cfg).unwrap();
        assert_eq!(low.state(), high.state());
        let (a, b) = (low.model(), high.model());
        for t in 0..2 {
            assert!(b.phi[(t, 1)] >= a.phi[(t, 1)]);
        }
    }

    #[test]
    fn rows_are_stochastic_and_top_words_break_ties_by_id() {
        let c = corpus(4, vec![vec![0, 1, 2, 3, 0, 1], vec![2, 3, 3], vec![0, 0, 1]]);
        let mut cfg = config(2, 4, 0.5, 0.1, 8);
        cfg.average_samples = true;
        cfg.optimize_interval = 5;
        let m = train(&c, cfg).unwrap();
        for r in m.phi.row_iter().chain(m.theta.row_iter()) {
            assert!((r.sum() - 1.0).abs() < 1e-10);
        }
        let flat = TopicModel {
            phi: DMatrix::from_row_slice(1, 4, &[0.25, 0.25, 0.25, 0.25]),
            ..m
        };
        assert_eq!(flat.top_words(3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn alpha_optimization_keeps_positive() {
        let c = corpus(4, vec![vec![0, 1, 2, 3, 0, 1], vec![2, 3, 3], vec![0, 0, 1]]);
        let mut cfg = config(3, 4, 0.5, 0.1, 4);
        cfg.optimize_interval = 2;
        cfg.optimize_beta_scale = true;
        let mut chain = Gibbs::new(&c, cfg).unwrap();
        chain.run().unwrap();
        assert!(chain.alpha().iter().all(|&a| a >= MIN_ALPHA && a.is_finite()));
        assert!(chain.beta_scale() > 0.0);
    }

    #[test]
    fn config_errors() {
        let c = corpus(2, vec![vec![0, 1]]);
        let mut cfg = config(2, 2, 0.5, 0.1, 0);
        cfg.burn_in = cfg.iterations;
        assert!(matches!(Gibbs::new(&c, cfg), Err(Error::Config(_))));
        assert!(Gibbs::new(&c, config(2, 3, 0.5, 0.1, 0)).is_err());
        let mut cfg = config(2, 2, 0.5, 0.1, 0);
        cfg.alpha = vec![1.0, 0.0];
        assert!(Gibbs::new(&c, cfg).is_err());
    }

    #[test]
    fn exchangeability_on_toy_instance() {
        // sorted topic totals are (0, 2) or (1, 1); their frequencies must not
        // depend on document order
        let fwd = corpus(2, vec![vec![0], vec![1]]);
        let rev = corpus(2, vec![vec![1], vec![0]]);
        let count_split = |c: &Corpus, seed_base: u64| {
            (0..4000)
                .filter(|i| {
                    let mut cfg = config(2, 2, 1.0, 0.5, seed_base + i);
                    cfg.iterations = 5;
                    cfg.burn_in = 0;
                    let mut g = Gibbs::new(c, cfg).unwrap();
                    g.run().unwrap();
                    g.state().nk()[0] == 1
                })
                .count() as f64
                / 4000.0
        };
        let a = count_split(&fwd, 0);
        let b = count_split(&rev, 100_000);
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
        assert!((a - 2.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn topics_file_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let c = corpus(3, vec![vec![0, 1, 2, 2]]);
        let m = train(&c, config(2, 3, 0.5, 0.1, 1)).unwrap();
        let p = tmp.path().join("topics.txt");
        m.write_topics(&p, 2).unwrap();
        assert_eq!(read_topics(&p).unwrap(), m.top_terms(2));
    }
}
