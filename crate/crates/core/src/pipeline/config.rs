//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown keys are an error. Relative paths in a config file are
//! resolved against the file's directory. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::synthetic::SyntheticParams;
use crate::corpus::{StopwordList, VocabFilters};
use crate::error::{Error, Result};
use crate::evaluation::{CoverageMean, FailurePolicy, DEFAULT_CV_WINDOW, DEFAULT_NPMI_WINDOW};
use crate::sampler::AlphaMode;

/// Which prior the run builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// PPMI → second-order cosine → diffusion map → GMM → moments.
    Prism,
    /// As `Prism` but embeds the PPMI matrix itself.
    NoSoc,
    /// As `Prism` with an SVD in place of the diffusion map.
    Svd,
    /// i.i.d. uniform β on `[1e-4, 1]`.
    RandomPrior,
    /// Constant β.
    PlainSymmetric,
    /// Word vectors read from `embedding_file` replace the corpus embedding.
    ExternalEmbedding,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Prism,
        Mode::NoSoc,
        Mode::Svd,
        Mode::RandomPrior,
        Mode::PlainSymmetric,
        Mode::ExternalEmbedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Prism => "prism",
            Mode::NoSoc => "no_soc",
            Mode::Svd => "svd",
            Mode::RandomPrior => "random_prior",
            Mode::PlainSymmetric => "plain_symmetric",
            Mode::ExternalEmbedding => "external_embedding",
        }
    }

    /// Whether the mode embeds the corpus co-occurrence graph.
    pub fn uses_graph(self) -> bool {
        matches!(self, Mode::Prism | Mode::NoSoc | Mode::Svd)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    /// Directory with `vocabulary.txt` and `counts.tsv`.
    Canonical(PathBuf),
    Octis {
        corpus: PathBuf,
        vocab: Option<PathBuf>,
    },
    Plaintext(PathBuf),
    Expression {
        matrix: PathBuf,
        genes: PathBuf,
    },
    Synthetic(SyntheticParams),
}

/// Context strategy before the corpus is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    Document,
    Sliding(usize),
    /// kNN neighborhoods over expression profiles.
    Knn(usize),
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowSpec::Document => write!(f, "document"),
            WindowSpec::Sliding(w) => write!(f, "sliding:{w}"),
            WindowSpec::Knn(k) => write!(f, "knn:{k}"),
        }
    }
}

impl FromStr for WindowSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad window `{s}` (document, sliding:N or knn:K)"));
        match s.split_once(':') {
            None if s == "document" => Ok(WindowSpec::Document),
            Some(("sliding", n)) => Ok(WindowSpec::Sliding(n.parse().map_err(|_| bad())?)),
            Some(("knn", k)) => Ok(WindowSpec::Knn(k.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Npmi,
    Cv,
    Wid,
    GeneSet,
    /// Matched cosine to planted topics (synthetic input only).
    Recovery,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Npmi => "npmi",
            Metric::Cv => "cv",
            Metric::Wid => "wid",
            Metric::GeneSet => "geneset",
            Metric::Recovery => "recovery",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Metric::Npmi, Metric::Cv, Metric::Wid, Metric::GeneSet, Metric::Recovery]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JudgeSpec {
    Oracle,
    Random,
    Embedding(PathBuf),
    /// Program and arguments, split on whitespace.
    Command(Vec<String>),
}

impl fmt::Display for JudgeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JudgeSpec::Oracle => write!(f, "oracle"),
            JudgeSpec::Random => write!(f, "random"),
            JudgeSpec::Embedding(p) => write!(f, "embedding:{}", p.display()),
            JudgeSpec::Command(c) => write!(f, "command:{}", c.join(" ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: InputSpec,
    pub filters: VocabFilters,
    /// Canonical corpus directory for coherence; the training corpus if unset.
    pub reference: Option<PathBuf>,
    pub window: WindowSpec,
    pub knn_pca_dims: usize,
    pub neighbor_min_count: u32,
    /// Embedding dimensions; more than one value triggers c_v-based selection.
    pub dims: Vec<usize>,
    pub diffusion_time: u32,
    pub topics: Vec<usize>,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub embedding_file: Option<PathBuf>,
    pub iterations: usize,
    pub burn_in: usize,
    pub optimize_interval: usize,
    /// Initial Σα, spread evenly over topics.
    pub alpha_sum: f64,
    pub alpha_mode: AlphaMode,
    /// β value for `plain_symmetric`.
    pub symmetric_beta: f64,
    pub optimize_beta_scale: bool,
    pub average_samples: bool,
    pub metrics: Vec<Metric>,
    pub top_n: usize,
    pub npmi_window: WindowSpec,
    pub cv_window: usize,
    pub wid_sizes: Vec<usize>,
    pub judge: JudgeSpec,
    pub judge_timeout_secs: u64,
    pub judge_max_in_flight: usize,
    pub wid_failures: FailurePolicy,
    pub pathways: Option<PathBuf>,
    pub universe: Option<usize>,
    pub coverage: CoverageMean,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: InputSpec::Canonical(PathBuf::from("corpus")),
            filters: VocabFilters::default(),
            reference: None,
            window: WindowSpec::Document,
            knn_pca_dims: 50,
            neighbor_min_count: 1,
            dims: vec![100],
            diffusion_time: 1,
            topics: vec![20],
            seeds: vec![1],
            mode: Mode::Prism,
            embedding_file: None,
            iterations: 1000,
            burn_in: 200,
            optimize_interval: 10,
            alpha_sum: 5.0,
            alpha_mode: AlphaMode::Asymmetric,
            symmetric_beta: 0.01,
            optimize_beta_scale: false,
            average_samples: false,
            metrics: vec![Metric::Npmi, Metric::Cv],
            top_n: 10,
            npmi_window: WindowSpec::Sliding(DEFAULT_NPMI_WINDOW),
            cv_window: DEFAULT_CV_WINDOW,
            wid_sizes: vec![10, 15, 20],
            judge: JudgeSpec::Random,
            judge_timeout_secs: 60,
            judge_max_in_flight: 8,
            wid_failures: FailurePolicy::Incorrect,
            pathways: None,
            universe: None,
            coverage: CoverageMean::Simple,
            out: PathBuf::from("run"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn synth(input: &mut InputSpec) -> &mut SyntheticParams {
    if !matches!(input, InputSpec::Synthetic(_)) {
        *input = InputSpec::Synthetic(SyntheticParams::new(5, 300, 500, 40, 0));
    }
    match input {
        InputSpec::Synthetic(p) => p,
        _ => unreachable!(),
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = PipelineConfig::default();
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.apply(&text, Some(base))?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply(&mut self, text: &str, base: Option<&Path>) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set_with_base(key.trim(), value.trim(), base)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_with_base(key, value, None)
    }

    fn set_with_base(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        match key {
            "input_format" => {
                let current = self.input_path();
                self.input = match value {
                    "canonical" => InputSpec::Canonical(current),
                    "octis" => InputSpec::Octis {
                        corpus: current,
                        vocab: None,
                    },
                    "plaintext" => InputSpec::Plaintext(current),
                    "expression" => InputSpec::Expression {
                        matrix: current,
                        genes: PathBuf::from("genes.txt"),
                    },
                    "synthetic" => {
                        synth(&mut self.input);
                        return Ok(());
                    }
                    _ => return Err(Error::Config(format!("unknown input_format `{value}`"))),
                }
            }
            "input" => match &mut self.input {
                InputSpec::Canonical(p) | InputSpec::Plaintext(p) => *p = path(value),
                InputSpec::Octis { corpus, .. } => *corpus = path(value),
                InputSpec::Expression { matrix, .. } => *matrix = path(value),
                InputSpec::Synthetic(_) => {
                    return Err(Error::Config("`input` does not apply to synthetic data".into()))
                }
            },
            "vocab" => match &mut self.input {
                InputSpec::Octis { vocab, .. } => *vocab = Some(path(value)),
                _ => {
                    return Err(Error::Config(
                        "`vocab` needs input_format = octis (set it first)".into(),
                    ))
                }
            },
            "genes" => match &mut self.input {
                InputSpec::Expression { genes, .. } => *genes = path(value),
                _ => {
                    return Err(Error::Config(
                        "`genes` needs input_format = expression (set it first)".into(),
                    ))
                }
            },
            "synth_topics" => synth(&mut self.input).k = parse(key, value)?,
            "synth_vocab" => synth(&mut self.input).v = parse(key, value)?,
            "synth_docs" => synth(&mut self.input).docs = parse(key, value)?,
            "synth_doc_len" => synth(&mut self.input).doc_len = parse(key, value)?,
            "synth_alpha" => synth(&mut self.input).alpha = parse(key, value)?,
            "synth_sparsity" => synth(&mut self.input).topic_sparsity = parse(key, value)?,
            "synth_phi_concentration" => synth(&mut self.input).phi_concentration = parse(key, value)?,
            "synth_seed" => synth(&mut self.input).seed = parse(key, value)?,
            "lowercase" => self.filters.lowercase = parse_bool(key, value)?,
            "remove_numbers" => self.filters.remove_numbers = parse_bool(key, value)?,
            "remove_punctuation" => self.filters.remove_punctuation = parse_bool(key, value)?,
            "min_chars" => self.filters.min_chars = parse(key, value)?,
            "min_words_docs" => self.filters.min_words_docs = parse(key, value)?,
            "min_df" => self.filters.min_df = parse(key, value)?,
            "max_df" => self.filters.max_df = parse(key, value)?,
            "max_features" => {
                self.filters.max_features = if value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "stopwords" => {
                self.filters.stopwords = match value {
                    "english" => StopwordList::English,
                    "none" => StopwordList::None,
                    other => StopwordList::File(path(other)),
                }
            }
            "reference" => self.reference = Some(path(value)),
            "window" => self.window = parse(key, value)?,
            "knn_pca_dims" => self.knn_pca_dims = parse(key, value)?,
            "neighbor_min_count" => self.neighbor_min_count = parse(key, value)?,
            "dims" => self.dims = parse_list(key, value)?,
            "diffusion_time" => self.diffusion_time = parse(key, value)?,
            "topics" => self.topics = parse_list(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "mode" => self.mode = value.parse()?,
            "embedding_file" => self.embedding_file = Some(path(value)),
            "iterations" => self.iterations = parse(key, value)?,
            "burn_in" => self.burn_in = parse(key, value)?,
            "optimize_interval" => self.optimize_interval = parse(key, value)?,
            "alpha_sum" => self.alpha_sum = parse(key, value)?,
            "alpha_mode" => {
                self.alpha_mode = match value {
                    "asymmetric" => AlphaMode::Asymmetric,
                    "symmetric" => AlphaMode::Symmetric,
                    _ => return Err(Error::Config(format!("unknown alpha_mode `{value}`"))),
                }
            }
            "symmetric_beta" => self.symmetric_beta = parse(key, value)?,
            "optimize_beta_scale" => self.optimize_beta_scale = parse_bool(key, value)?,
            "average_samples" => self.average_samples = parse_bool(key, value)?,
            "metrics" => self.metrics = parse_list(key, value)?,
            "top_n" => self.top_n = parse(key, value)?,
            "npmi_window" => self.npmi_window = parse(key, value)?,
            "cv_window" => self.cv_window = parse(key, value)?,
            "wid_sizes" => self.wid_sizes = parse_list(key, value)?,
            "judge" => {
                self.judge = match value.split_once(':') {
                    None if value == "oracle" => JudgeSpec::Oracle,
                    None if value == "random" => JudgeSpec::Random,
                    Some(("embedding", p)) => JudgeSpec::Embedding(path(p)),
                    Some(("command", c)) => JudgeSpec::Command(c.split_whitespace().map(String::from).collect()),
                    _ => return Err(Error::Config(format!("unknown judge `{value}`"))),
                }
            }
            "judge_timeout_secs" => self.judge_timeout_secs = parse(key, value)?,
            "judge_max_in_flight" => self.judge_max_in_flight = parse(key, value)?,
            "wid_failures" => {
                self.wid_failures = match value {
                    "incorrect" => FailurePolicy::Incorrect,
                    "excluded" => FailurePolicy::Excluded,
                    _ => return Err(Error::Config(format!("unknown wid_failures `{value}`"))),
                }
            }
            "pathways" => self.pathways = Some(path(value)),
            "universe" => self.universe = Some(parse(key, value)?),
            "coverage" => {
                self.coverage = match value {
                    "simple" => CoverageMean::Simple,
                    "size_weighted" => CoverageMean::SizeWeighted,
                    _ => return Err(Error::Config(format!("unknown coverage `{value}`"))),
                }
            }
            "out" => self.out = path(value),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    fn input_path(&self) -> PathBuf {
        match &self.input {
            InputSpec::Canonical(p) | InputSpec::Plaintext(p) => p.clone(),
            InputSpec::Octis { corpus, .. } => corpus.clone(),
            InputSpec::Expression { matrix, .. } => matrix.clone(),
            InputSpec::Synthetic(_) => PathBuf::from("corpus"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() {
            return Err(Error::Config("`topics` must list at least one K".into()));
        }
        if self.topics.contains(&0) {
            return Err(Error::Config("K must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::Config("`dims` must list positive dimensions".into()));
        }
        if self.diffusion_time == 0 {
            return Err(Error::Config("diffusion_time must be positive".into()));
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config("need iterations >= 1 and burn_in < iterations".into()));
        }
        if !(self.alpha_sum > 0.0) || !(self.symmetric_beta > 0.0) {
            return Err(Error::Config("alpha_sum and symmetric_beta must be positive".into()));
        }
        if self.mode.uses_graph() || self.mode == Mode::ExternalEmbedding {
            if let Some(k) = self.topics.iter().find(|&&k| k < 2) {
                return Err(Error::Config(format!(
                    "mode {} needs K >= 2 for moment estimation, got {k}",
                    self.mode
                )));
            }
        }
        if self.mode == Mode::ExternalEmbedding && self.embedding_file.is_none() {
            return Err(Error::Config("mode external_embedding needs `embedding_file`".into()));
        }
        if matches!(self.window, WindowSpec::Knn(_)) && !matches!(self.input, InputSpec::Expression { .. }) {
            return Err(Error::Config("knn windows need input_format = expression".into()));
        }
        if matches!(self.npmi_window, WindowSpec::Knn(_)) {
            return Err(Error::Config("npmi_window must be document or sliding:N".into()));
        }
        if self.top_n < 2 {
            return Err(Error::Config("top_n must be at least 2".into()));
        }
        if self.metrics.contains(&Metric::GeneSet) {
            if !matches!(self.input, InputSpec::Expression { .. }) {
                return Err(Error::Config(
                    "the geneset metric needs input_format = expression".into(),
                ));
            }
            if self.pathways.is_none() {
                return Err(Error::Config("the geneset metric needs `pathways`".into()));
            }
        }
        if self.metrics.contains(&Metric::Recovery) && !matches!(self.input, InputSpec::Synthetic(_)) {
            return Err(Error::Config("the recovery metric needs synthetic input".into()));
        }
        if self.metrics.contains(&Metric::Wid) && (self.wid_sizes.is_empty() || self.wid_sizes.contains(&0)) {
            return Err(Error::Config("wid_sizes must list positive sizes".into()));
        }
        if let InputSpec::Synthetic(p) = &self.input {
            p.validate()?;
        }
        self.filters.validate()
    }

    /// Every setting except `out`, as it would be written in a config file.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        match &self.input {
            InputSpec::Canonical(p) => {
                put("input_format", "canonical".into());
                put("input", p.display().to_string());
            }
            InputSpec::Octis { corpus, vocab } => {
                put("input_format", "octis".into());
                put("input", corpus.display().to_string());
                if let Some(v) = vocab {
                    put("vocab", v.display().to_string());
                }
            }
            InputSpec::Plaintext(p) => {
                put("input_format", "plaintext".into());
                put("input", p.display().to_string());
            }
            InputSpec::Expression { matrix, genes } => {
                put("input_format", "expression".into());
                put("input", matrix.display().to_string());
                put("genes", genes.display().to_string());
            }
            InputSpec::Synthetic(p) => {
                put("input_format", "synthetic".into());
                put("synth_topics", p.k.to_string());
                put("synth_vocab", p.v.to_string());
                put("synth_docs", p.docs.to_string());
                put("synth_doc_len", p.doc_len.to_string());
                put("synth_alpha", p.alpha.to_string());
                put("synth_sparsity", p.topic_sparsity.to_string());
                put("synth_phi_concentration", p.phi_concentration.to_string());
                put("synth_seed", p.seed.to_string());
            }
        }
        if matches!(self.input, InputSpec::Plaintext(_)) {
            let f = &self.filters;
            put("lowercase", f.lowercase.to_string());
            put("remove_numbers", f.remove_numbers.to_string());
            put("remove_punctuation", f.remove_punctuation.to_string());
            put("min_chars", f.min_chars.to_string());
            put("min_words_docs", f.min_words_docs.to_string());
            put("min_df", f.min_df.to_string());
            put("max_df", f.max_df.to_string());
            put("max_features", f.max_features.map_or("none".into(), |n| n.to_string()));
            put(
                "stopwords",
                match &f.stopwords {
                    StopwordList::English => "english".into(),
                    StopwordList::None => "none".into(),
                    StopwordList::File(p) => p.display().to_string(),
                },
            );
        }
        if let Some(r) = &self.reference {
            put("reference", r.display().to_string());
        }
        put("window", self.window.to_string());
        put("knn_pca_dims", self.knn_pca_dims.to_string());
        put("neighbor_min_count", self.neighbor_min_count.to_string());
        put("dims", join(&self.dims));
        put("diffusion_time", self.diffusion_time.to_string());
        put("topics", join(&self.topics));
        put("seeds", join(&self.seeds));
        put("mode", self.mode.to_string());
        if let Some(e) = &self.embedding_file {
            put("embedding_file", e.display().to_string());
        }
        put("iterations", self.iterations.to_string());
        put("burn_in", self.burn_in.to_string());
        put("optimize_interval", self.optimize_interval.to_string());
        put("alpha_sum", self.alpha_sum.to_string());
        put(
            "alpha_mode",
            match self.alpha_mode {
                AlphaMode::Asymmetric => "asymmetric".into(),
                AlphaMode::Symmetric => "symmetric".into(),
            },
        );
        put("symmetric_beta", self.symmetric_beta.to_string());
        put("optimize_beta_scale", self.optimize_beta_scale.to_string());
        put("average_samples", self.average_samples.to_string());
        put(
            "metrics",
            self.metrics.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        put("top_n", self.top_n.to_string());
        put("npmi_window", self.npmi_window.to_string());
        put("cv_window", self.cv_window.to_string());
        put("wid_sizes", join(&self.wid_sizes));
        put("judge", self.judge.to_string());
        put("judge_timeout_secs", self.judge_timeout_secs.to_string());
        put("judge_max_in_flight", self.judge_max_in_flight.to_string());
        put(
            "wid_failures",
            match self.wid_failures {
                FailurePolicy::Incorrect => "incorrect".into(),
                FailurePolicy::Excluded => "excluded".into(),
            },
        );
        if let Some(p) = &self.pathways {
            put("pathways", p.display().to_string());
        }
        if let Some(u) = self.universe {
            put("universe", u.to_string());
        }
        put(
            "coverage",
            match self.coverage {
                CoverageMean::Simple => "simple".into(),
                CoverageMean::SizeWeighted => "size_weighted".into(),
            },
        );
        m
    }

    /// Config-file text that reproduces this configuration.
    pub fn render(&self) -> String {
        let m = self.resolved();
        // input_format must precede the keys that depend on it
        let mut s = format!("input_format = {}\n", m["input_format"]);
        for (k, v) in m.iter().filter(|(k, _)| k.as_str() != "input_format") {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("out = {}\n", self.out.display()));
        s
    }
}
