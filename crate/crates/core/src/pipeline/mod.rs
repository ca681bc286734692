//! End-to-end runs: ingest → co-occurrence → embedding → prior → Gibbs →
//! metrics over a grid of topic counts and seeds, with every intermediate
//! artifact written to disk and hashed into a JSON manifest.
//!
//! Output layout under `out`:
//!
//! ```text
//! config.txt                     resolved configuration
//! corpus/vocabulary.txt          ingested corpus (canonical form)
//! corpus/counts.tsv
//! corpus/tokens.txt              token order
//! truth/phi.bin                  planted topics (synthetic input)
//! cooccurrence/neighborhoods.tsv kNN sets (knn window)
//! cooccurrence/ppmi.bin
//! graph/similarity.bin
//! embedding/coords.bin           word coordinates, V × m
//! embedding/eigenvalues.txt
//! embedding/dims_selection.tsv   c_v per candidate m (dims grid)
//! cells/K{k}_seed{s}/            per grid cell: responsibilities.bin,
//!                                topic_word.bin, beta.txt, phi.bin,
//!                                theta.bin, topics.txt, report.tsv
//! manifest.json
//! ```
//!
//! Binary matrices use [`crate::matrix_io`].

mod config;
mod manifest;
mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cooccurrence::{
    first_order_graph, knn_neighborhoods, ppmi, second_order_graph, write_neighborhoods, Neighborhoods, WindowStrategy,
};
use crate::corpus::{
    ingest_expression_matrix, ingest_octis, ingest_plaintext, unigram, Corpus, FeatureMatrix, VocabFilters,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    build_wid_instances, cv_score, gene_set_metrics, npmi_score, wid_accuracy, EmbeddingJudge, Judge, PathwayDb,
    RandomJudge, Report, ScriptedJudge, SubprocessJudge, TopicWordLists, WidConfig,
};
use crate::matrix_io::write_dense;
use crate::prior::{load_external_embedding, prior_from_embedding, random_prior, DirichletParam};
use crate::sampler::{train, LdaConfig, TopicModel};
use crate::spectral::{diffusion_spectrum, embedding_from_spectrum, svd_embed, DiffusionEmbedding};

pub use config::{InputSpec, JudgeSpec, Metric, Mode, PipelineConfig, WindowSpec};
pub use manifest::{aggregate_runs, compare_runs, Comparison, ComparisonRow, RunManifest, RunRecord, Summary};
pub use synthetic::{generate_synthetic, matched_cosine, SyntheticCorpus, SyntheticParams};

/// Hex sha256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// What ingestion produced.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub features: Option<FeatureMatrix>,
    /// Planted topics over the corpus vocabulary (synthetic input).
    pub truth: Option<DMatrix<f64>>,
}

pub fn load_input(input: &InputSpec, filters: &VocabFilters) -> Result<Ingested> {
    let plain = |corpus| Ingested {
        corpus,
        features: None,
        truth: None,
    };
    Ok(match input {
        InputSpec::Canonical(dir) => plain(Corpus::read_canonical(dir)?),
        InputSpec::Octis { corpus, vocab } => plain(ingest_octis(corpus, vocab.as_deref())?),
        InputSpec::Plaintext(path) => plain(ingest_plaintext(path, filters)?),
        InputSpec::Expression { matrix, genes } => {
            let (corpus, features) = ingest_expression_matrix(matrix, genes)?;
            Ingested {
                corpus,
                features: Some(features),
                truth: None,
            }
        }
        InputSpec::Synthetic(params) => {
            let s = generate_synthetic(params)?;
            Ingested {
                corpus: s.corpus,
                features: None,
                truth: Some(s.phi),
            }
        }
    })
}

/// Builds the similarity graph for a graph mode and embeds it with `m` dimensions.
pub fn corpus_embedding(
    corpus: &Corpus,
    window: &WindowStrategy,
    mode: Mode,
    m: usize,
    t: u32,
) -> Result<DiffusionEmbedding> {
    let p = ppmi(corpus, window)?;
    let graph = if mode == Mode::NoSoc {
        first_order_graph(&p)
    } else {
        second_order_graph(&p)
    };
    match mode {
        Mode::Svd => svd_embed(&graph, m),
        _ => embedding_from_spectrum(&diffusion_spectrum(&graph)?, m, t),
    }
}

/// Topic-quality metrics for one trained model. Keys: `npmi`, `cv`,
/// `wid@n`, `gs_coherence`, `gs_coverage`, `gs_strength`,
/// `gs_enriched_fraction`, `recovery`.
pub struct Evaluator<'a> {
    pub config: &'a PipelineConfig,
    pub reference: &'a Corpus,
    pub features: Option<&'a FeatureMatrix>,
    pub pathways: Option<&'a PathwayDb>,
    pub truth: Option<&'a DMatrix<f64>>,
}

impl Evaluator<'_> {
    fn judge(&self, seed: u64, instances: &[crate::evaluation::WidInstance]) -> Result<Box<dyn Judge>> {
        Ok(match &self.config.judge {
            JudgeSpec::Oracle => Box::new(ScriptedJudge::oracle(instances)),
            JudgeSpec::Random => Box::new(RandomJudge::new(seed)),
            JudgeSpec::Embedding(path) => Box::new(EmbeddingJudge::from_file(path)?),
            JudgeSpec::Command(cmd) => {
                let (program, args) = cmd
                    .split_first()
                    .ok_or_else(|| Error::Config("judge command is empty".into()))?;
                let mut j = SubprocessJudge::spawn(program, args)?;
                j.timeout = Duration::from_secs(self.config.judge_timeout_secs);
                j.max_in_flight = self.config.judge_max_in_flight;
                Box::new(j)
            }
        })
    }

    pub fn evaluate(&self, model: &TopicModel, seed: u64) -> Result<(BTreeMap<String, f64>, Report)> {
        let cfg = self.config;
        let lists = TopicWordLists::from_model(model, cfg.top_n)?;
        let mut metrics = BTreeMap::new();
        let mut report = Report::new(&[]);
        for metric in &cfg.metrics {
            match metric {
                Metric::Npmi => {
                    let window = match cfg.npmi_window {
                        WindowSpec::Document => WindowStrategy::Document,
                        WindowSpec::Sliding(w) => WindowStrategy::Sliding(w),
                        WindowSpec::Knn(_) => unreachable!("rejected by validation"),
                    };
                    let s = npmi_score(&lists, self.reference, &window)?;
                    report.set_column("npmi", &s.per_topic.iter().map(|&x| Some(x)).collect::<Vec<_>>());
                    metrics.insert("npmi".into(), s.mean);
                }
                Metric::Cv => {
                    let s = cv_score(&lists, self.reference, cfg.cv_window)?;
                    report.set_column("cv", &s.per_topic.iter().map(|&x| Some(x)).collect::<Vec<_>>());
                    metrics.insert("cv".into(), s.mean);
                }
                Metric::Wid => {
                    for &n in &cfg.wid_sizes {
                        let instances = build_wid_instances(model, &WidConfig::new(n, seed))?;
                        if instances.is_empty() {
                            log::warn!("no word intrusion instances for n = {n}; metric skipped");
                            continue;
                        }
                        let mut judge = self.judge(seed, &instances)?;
                        let r = wid_accuracy(&instances, judge.as_mut(), cfg.wid_failures)?;
                        metrics.insert(format!("wid@{n}"), r.accuracy);
                    }
                }
                Metric::GeneSet => {
                    let features = self
                        .features
                        .ok_or_else(|| Error::Config("geneset needs expression input".into()))?;
                    let db = self
                        .pathways
                        .ok_or_else(|| Error::Config("geneset needs `pathways`".into()))?;
                    let universe = cfg.universe.unwrap_or(features.genes().len());
                    let r = gene_set_metrics(&lists, features, db, universe, cfg.coverage)?;
                    report.set_column(
                        "gs_coherence",
                        &r.topics.iter().map(|t| Some(t.coherence)).collect::<Vec<_>>(),
                    );
                    report.set_column(
                        "gs_coverage",
                        &r.topics.iter().map(|t| Some(t.coverage)).collect::<Vec<_>>(),
                    );
                    report.set_column("gs_strength", &r.topics.iter().map(|t| t.strength).collect::<Vec<_>>());
                    metrics.insert("gs_coherence".into(), r.mean_coherence);
                    metrics.insert("gs_coverage".into(), r.mean_coverage);
                    metrics.insert(
                        "gs_enriched_fraction".into(),
                        r.enriched_topics as f64 / r.topics.len() as f64,
                    );
                    if let Some(s) = r.mean_strength {
                        metrics.insert("gs_strength".into(), s);
                    }
                }
                Metric::Recovery => {
                    let truth = self
                        .truth
                        .ok_or_else(|| Error::Config("recovery needs synthetic input".into()))?;
                    metrics.insert("recovery".into(), matched_cosine(&model.phi, truth)?);
                }
            }
        }
        for (k, v) in &metrics {
            report.push_summary_value(k, Some(*v));
        }
        Ok((metrics, report))
    }
}

/// Where a run stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StopAfter {
    Prior,
    Train,
    Evaluate,
}

struct Run<'a> {
    out: &'a Path,
    artifacts: Mutex<BTreeMap<String, String>>,
    timings: Mutex<BTreeMap<String, f64>>,
}

impl Run<'_> {
    fn path(&self, rel: &str) -> Result<PathBuf> {
        let p = self.out.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(p)
    }

    /// Writes through `f`, then hashes the file into the manifest.
    fn artifact(&self, rel: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let p = self.path(rel)?;
        f(&p)?;
        let digest = sha256_file(&p)?;
        self.artifacts.lock().unwrap().insert(rel.to_string(), digest);
        Ok(())
    }

    fn stage<T>(&self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let r = f().map_err(|e| e.in_stage(name));
        let secs = start.elapsed().as_secs_f64();
        *self.timings.lock().unwrap().entry(name.to_string()).or_insert(0.0) += secs;
        r
    }
}

fn resolve_window(cfg: &PipelineConfig, ing: &Ingested, run: &Run) -> Result<WindowStrategy> {
    Ok(match cfg.window {
        WindowSpec::Document => WindowStrategy::Document,
        WindowSpec::Sliding(w) => WindowStrategy::Sliding(w),
        WindowSpec::Knn(k) => {
            let features = ing
                .features
                .as_ref()
                .ok_or_else(|| Error::Config("knn windows need expression input".into()))?;
            let dims = cfg.knn_pca_dims.min(features.cells().min(features.genes().len()));
            let sets = knn_neighborhoods(features, k, dims)?;
            run.artifact("cooccurrence/neighborhoods.tsv", |p| write_neighborhoods(p, &sets))?;
            WindowStrategy::Neighborhood(Neighborhoods {
                sets,
                min_count: cfg.neighbor_min_count,
            })
        }
    })
}

fn cell_dir(k: usize, seed: u64) -> String {
    format!("cells/K{k}_seed{seed}")
}

pub fn lda_config(cfg: &PipelineConfig, k: usize, beta: DirichletParam, seed: u64) -> LdaConfig {
    let mut c = LdaConfig::new(k, beta, seed).with_symmetric_alpha(cfg.alpha_sum / k as f64);
    c.iterations = cfg.iterations;
    c.burn_in = cfg.burn_in;
    c.optimize_interval = cfg.optimize_interval;
    c.alpha_mode = cfg.alpha_mode;
    c.optimize_beta_scale = cfg.optimize_beta_scale;
    c.average_samples = cfg.average_samples;
    c
}

/// Runs the whole grid and writes `manifest.json`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    run_pipeline_until(cfg, StopAfter::Evaluate)
}

pub fn run_pipeline_until(cfg: &PipelineConfig, stop: StopAfter) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    fs::write(cfg.out.join("config.txt"), cfg.render()).map_err(|e| Error::io(&cfg.out, e))?;
    let run = Run {
        out: &cfg.out,
        artifacts: Mutex::new(BTreeMap::new()),
        timings: Mutex::new(BTreeMap::new()),
    };

    let corpus_dir = cfg.out.join("corpus");
    let ing = run.stage("ingest", || {
        let ing = load_input(&cfg.input, &cfg.filters)?;
        ing.corpus.write_canonical(&corpus_dir)?;
        Ok(ing)
    })?;
    for name in ["vocabulary.txt", "counts.tsv", "tokens.txt"] {
        run.artifact(&format!("corpus/{name}"), |_| Ok(()))?;
    }
    if let Some(truth) = &ing.truth {
        run.artifact("truth/phi.bin", |p| write_dense(p, truth))?;
    }
    let dataset = {
        let a = run.artifacts.lock().unwrap();
        let joined: String = ["vocabulary.txt", "counts.tsv", "tokens.txt"]
            .iter()
            .map(|n| a[&format!("corpus/{n}")].as_str())
            .collect();
        hex::encode(Sha256::digest(joined))
    };
    let corpus = &ing.corpus;
    let v = corpus.num_terms();
    let uni = unigram(corpus);

    // embedding (K independent)
    let mut selected_dims = None;
    let coords: Option<DMatrix<f64>> = match cfg.mode {
        Mode::RandomPrior | Mode::PlainSymmetric => None,
        Mode::ExternalEmbedding => {
            let path = cfg.embedding_file.as_ref().expect("validated");
            let coords = run.stage("embed", || load_external_embedding(path, corpus.vocab()))?;
            run.artifact("embedding/coords.bin", |p| write_dense(p, &coords))?;
            Some(coords)
        }
        mode => {
            let window = run.stage("cooccurrence", || resolve_window(cfg, &ing, &run))?;
            let p = run.stage("cooccurrence", || ppmi(corpus, &window))?;
            run.artifact("cooccurrence/ppmi.bin", |path| write_dense(path, &p.m))?;
            let graph = run.stage("graph", || {
                Ok(if mode == Mode::NoSoc {
                    first_order_graph(&p)
                } else {
                    second_order_graph(&p)
                })
            })?;
            drop(p);
            run.artifact("graph/similarity.bin", |path| write_dense(path, &graph.w))?;
            let spectrum = if mode == Mode::Svd {
                None
            } else {
                Some(run.stage("embed", || diffusion_spectrum(&graph))?)
            };
            let embed = |m: usize| -> Result<DiffusionEmbedding> {
                match &spectrum {
                    Some(s) => embedding_from_spectrum(s, m, cfg.diffusion_time),
                    None => svd_embed(&graph, m),
                }
            };
            let m = if cfg.dims.len() > 1 {
                let chosen = run.stage("select_dims", || select_dims(cfg, corpus, &embed, &run))?;
                selected_dims = Some(chosen);
                chosen
            } else {
                cfg.dims[0]
            };
            let e = run.stage("embed", || embed(m))?;
            run.artifact("embedding/coords.bin", |path| write_dense(path, &e.coords))?;
            run.artifact("embedding/eigenvalues.txt", |path| e.write_eigenvalues(path))?;
            Some(e.coords)
        }
    };

    let reference = match &cfg.reference {
        Some(dir) => Some(Corpus::read_canonical(dir)?),
        None => None,
    };
    let pathways = match &cfg.pathways {
        Some(p) if cfg.metrics.contains(&Metric::GeneSet) => Some(PathwayDb::read(p)?),
        _ => None,
    };
    let evaluator = Evaluator {
        config: cfg,
        reference: reference.as_ref().unwrap_or(corpus),
        features: ing.features.as_ref(),
        pathways: pathways.as_ref(),
        truth: ing.truth.as_ref(),
    };

    let cells: Vec<(usize, u64)> = cfg
        .topics
        .iter()
        .flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(k, seed)| -> Result<Option<RunRecord>> {
            let dir = cell_dir(k, seed);
            let tag = format!("K{k}_seed{seed}");
            let beta = run.stage(&format!("prior/{tag}"), || match cfg.mode {
                Mode::PlainSymmetric => DirichletParam::symmetric(v, cfg.symmetric_beta),
                Mode::RandomPrior => random_prior(v, seed),
                _ => {
                    let fit = prior_from_embedding(coords.as_ref().expect("embedded"), &uni, k, seed)?;
                    run.artifact(&format!("{dir}/responsibilities.bin"), |p| {
                        write_dense(p, &fit.gmm.responsibilities)
                    })?;
                    run.artifact(&format!("{dir}/topic_word.bin"), |p| write_dense(p, &fit.topic_word.x))?;
                    Ok(fit.beta)
                }
            })?;
            run.artifact(&format!("{dir}/beta.txt"), |p| beta.write(p))?;
            if stop == StopAfter::Prior {
                return Ok(None);
            }
            let model = run.stage(&format!("train/{tag}"), || {
                train(corpus, lda_config(cfg, k, beta, seed))
            })?;
            run.artifact(&format!("{dir}/phi.bin"), |p| write_dense(p, &model.phi))?;
            run.artifact(&format!("{dir}/theta.bin"), |p| write_dense(p, &model.theta))?;
            run.artifact(&format!("{dir}/topics.txt"), |p| model.write_topics(p, cfg.top_n))?;
            if stop == StopAfter::Train {
                return Ok(None);
            }
            let (metrics, report) = run.stage(&format!("eval/{tag}"), || evaluator.evaluate(&model, seed))?;
            run.artifact(&format!("{dir}/report.tsv"), |p| report.write(p))?;
            Ok(Some(RunRecord { k, seed, metrics }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();

    let (per_k, aggregate) = aggregate_runs(&runs);
    let manifest = RunManifest {
        mode: cfg.mode.to_string(),
        dataset,
        config: cfg.resolved(),
        artifacts: run.artifacts.into_inner().unwrap(),
        selected_dims,
        runs,
        per_k,
        aggregate,
        timings: run.timings.into_inner().unwrap(),
    };
    manifest.write(&cfg.out.join("manifest.json"))?;
    Ok(manifest)
}

/// Picks the embedding dimension with the best c_v for the first (K, seed).
/// Ties go to the smaller dimension.
fn select_dims(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    embed: &dyn Fn(usize) -> Result<DiffusionEmbedding>,
    run: &Run,
) -> Result<usize> {
    let (k, seed) = (cfg.topics[0], cfg.seeds[0]);
    let uni = unigram(corpus);
    let mut scores = Vec::new();
    for &m in &cfg.dims {
        let e = embed(m)?;
        let fit = prior_from_embedding(&e.coords, &uni, k, seed)?;
        let model = train(corpus, lda_config(cfg, k, fit.beta, seed))?;
        let lists = TopicWordLists::from_model(&model, cfg.top_n)?;
        scores.push((m, cv_score(&lists, corpus, cfg.cv_window)?.mean));
    }
    let body: String = scores.iter().map(|(m, s)| format!("{m}\t{s}\n")).collect();
    run.artifact("embedding/dims_selection.tsv", |p| {
        fs::write(p, format!("dims\tcv\n{body}")).map_err(|e| Error::io(p, e))
    })?;
    let best = scores
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|&(m, _)| m)
        .expect("dims is nonempty");
    log::info!("selected m = {best} by c_v");
    Ok(best)
}
