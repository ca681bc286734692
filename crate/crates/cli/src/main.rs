use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use topicprior::cooccurrence::WindowStrategy;
use topicprior::corpus::Corpus;
use topicprior::evaluation::{cv_score, npmi_score, Report, TopicWordLists};
use topicprior::matrix_io::write_dense;
use topicprior::pipeline::{
    compare_runs, generate_synthetic, lda_config, load_input, run_pipeline, run_pipeline_until, InputSpec, Metric,
    PipelineConfig, RunManifest, StopAfter, WindowSpec,
};
use topicprior::prior::DirichletParam;
use topicprior::sampler::{read_topics, train};
use topicprior::{Error, Result};

/// Corpus-derived Dirichlet priors for LDA topic models.
///
/// Every subcommand reads the same flat `key = value` configuration; use
/// `--set key=value` to override single keys.
#[derive(Parser, Debug)]
#[command(name = "topicprior", version)]
struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Prior mode: prism, no_soc, svd, random_prior, plain_symmetric, external_embedding.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read the configured input and write it as a canonical corpus.
    Ingest,
    /// Generate a planted-topic corpus with its ground truth.
    Synth,
    /// Build the embedding and the per-cell β̂ files, without training.
    Prior,
    /// Train topic models, either over the configured grid or from a β file.
    Train {
        /// Fixed β file (one value per line); trains one model with the first K and seed.
        #[arg(long)]
        beta: Option<PathBuf>,
    },
    /// Score topics files (`topics.txt`) for NPMI and c_v against the reference corpus.
    Eval {
        #[arg(required = true)]
        topics: Vec<PathBuf>,
    },
    /// Run the full grid and write `manifest.json`.
    Pipeline,
    /// Compare run manifests; the first is the subject. Arguments are `name=path` or `path`.
    Compare {
        #[arg(required = true)]
        manifests: Vec<String>,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{kv}` is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(mode) = &cli.mode {
        cfg.set("mode", mode)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn reference_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    match &cfg.reference {
        Some(dir) => Corpus::read_canonical(dir),
        None => Ok(load_input(&cfg.input, &cfg.filters)?.corpus),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = cfg.out.clone();
    match &cli.command {
        Command::Ingest => {
            let ing = load_input(&cfg.input, &cfg.filters)?;
            ing.corpus.write_canonical(&out)?;
            println!(
                "{} documents, {} terms, {} tokens ({} empty documents dropped) -> {}",
                ing.corpus.num_docs(),
                ing.corpus.num_terms(),
                ing.corpus.total_tokens(),
                ing.corpus.dropped_docs(),
                out.display()
            );
        }
        Command::Synth => {
            let InputSpec::Synthetic(params) = &cfg.input else {
                return Err(Error::Config(
                    "synth needs input_format = synthetic (or synth_* keys)".into(),
                ));
            };
            let s = generate_synthetic(params)?;
            s.corpus.write_canonical(&out.join("corpus"))?;
            let truth = out.join("truth");
            fs::create_dir_all(&truth).map_err(io_err(&truth))?;
            write_dense(&truth.join("phi.bin"), &s.phi)?;
            write_dense(&truth.join("theta.bin"), &s.theta)?;
            println!(
                "{} documents over {} terms -> {}",
                s.corpus.num_docs(),
                s.corpus.num_terms(),
                out.display()
            );
        }
        Command::Prior => {
            let m = run_pipeline_until(&cfg, StopAfter::Prior)?;
            println!("{} artifacts -> {}", m.artifacts.len(), out.display());
        }
        Command::Train { beta: None } => {
            let m = run_pipeline_until(&cfg, StopAfter::Train)?;
            println!("{} artifacts -> {}", m.artifacts.len(), out.display());
        }
        Command::Train { beta: Some(path) } => {
            let corpus = load_input(&cfg.input, &cfg.filters)?.corpus;
            let beta = DirichletParam::read(path)?;
            let (k, seed) = (cfg.topics[0], cfg.seeds[0]);
            let model = train(&corpus, lda_config(&cfg, k, beta, seed))?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            write_dense(&out.join("phi.bin"), &model.phi)?;
            write_dense(&out.join("theta.bin"), &model.theta)?;
            model.write_topics(&out.join("topics.txt"), cfg.top_n)?;
            println!(
                "K = {k}, seed = {seed}, log joint {:.3} -> {}",
                model.log_joint,
                out.display()
            );
        }
        Command::Eval { topics } => {
            let reference = reference_corpus(&cfg)?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            for path in topics {
                let lists = TopicWordLists::new(read_topics(path)?)?.truncated(cfg.top_n)?;
                let mut report = Report::new(&[]);
                for metric in &cfg.metrics {
                    let scores = match metric {
                        Metric::Npmi => {
                            let window = match cfg.npmi_window {
                                WindowSpec::Document => WindowStrategy::Document,
                                WindowSpec::Sliding(w) => WindowStrategy::Sliding(w),
                                WindowSpec::Knn(_) => unreachable!("rejected by validation"),
                            };
                            npmi_score(&lists, &reference, &window)?
                        }
                        Metric::Cv => cv_score(&lists, &reference, cfg.cv_window)?,
                        other => {
                            log::warn!("`{}` needs a trained model; use the pipeline subcommand", other.name());
                            continue;
                        }
                    };
                    let name = metric.name();
                    report.set_column(name, &scores.per_topic.iter().map(|&x| Some(x)).collect::<Vec<_>>());
                    report.push_summary_value(name, Some(scores.mean));
                }
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("topics");
                let dest = out.join(format!("{stem}.report.tsv"));
                report.write(&dest)?;
                print!("{}", report.render());
            }
        }
        Command::Pipeline => {
            let m = run_pipeline(&cfg)?;
            for (metric, s) in &m.aggregate {
                println!("{metric}\t{:.4} ({:.4})", s.mean, s.std);
            }
        }
        Command::Compare { manifests } => {
            let named = manifests
                .iter()
                .map(|arg| {
                    let (name, path) = match arg.split_once('=') {
                        Some((n, p)) => (n.to_string(), PathBuf::from(p)),
                        None => {
                            let p = PathBuf::from(arg);
                            let m = RunManifest::read(&p)?;
                            return Ok((m.mode.clone(), m));
                        }
                    };
                    Ok((name, RunManifest::read(&path)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = compare_runs(&named)?.render();
            print!("{table}");
            if cli.out.is_some() {
                fs::create_dir_all(&out).map_err(io_err(&out))?;
                let dest = out.join("comparison.tsv");
                fs::write(&dest, &table).map_err(io_err(&dest))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
