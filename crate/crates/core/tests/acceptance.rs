//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one `PASS`/`FAIL` line; the process fails if any blocking
//! criterion fails. Criterion 10 is informational.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use topicprior::cooccurrence::{ppmi, second_order_graph, GraphKind, SimilarityGraph, WindowStrategy};
use topicprior::corpus::{unigram, Corpus, FeatureMatrix, Vocabulary};
use topicprior::evaluation::{
    bh_adjust, build_wid_instances, hypergeometric_sf, npmi_score, spearman_coherence, wid_accuracy, FailurePolicy,
    RandomJudge, ScriptedJudge, TopicWordLists, WidConfig, WidInstance,
};
use topicprior::matrix_io::read_dense;
use topicprior::pipeline::{run_pipeline, Mode, PipelineConfig, RunManifest};
use topicprior::prior::{estimate_beta_from_samples, DirichletParam};
use topicprior::sampler::{Gibbs, LdaConfig, TopicModel};
use topicprior::spectral::{diffusion_embed, diffusion_spectrum, transition_matrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dirichlet_sample(rng: &mut impl Rng, beta: &[f64]) -> Vec<f64> {
    let x: Vec<f64> = beta.iter().map(|&b| Gamma::new(b, 1.0).unwrap().sample(rng)).collect();
    let s: f64 = x.iter().sum();
    x.into_iter().map(|v| v / s).collect()
}

/// Redraws until at least two distinct terms occur.
fn random_corpus(rng: &mut impl Rng, docs: usize, v: usize, len: std::ops::RangeInclusive<usize>) -> Corpus {
    let terms: Vec<String> = (0..v).map(|i| format!("t{i}")).collect();
    loop {
        let tokens = (0..docs)
            .map(|_| {
                let n = rng.random_range(len.clone());
                (0..n).map(|_| rng.random_range(0..v) as u32).collect()
            })
            .collect();
        if let Ok(c) = Corpus::new(Vocabulary::new(terms.clone()).unwrap(), tokens, vec![]) {
            return c;
        }
    }
}

// 1. Method-of-moments recovery.
fn criterion_1() -> Outcome {
    let targets: [&[f64]; 3] = [&[2.0, 5.0, 3.0], &[0.5, 0.5], &[1.0, 1.0, 1.0, 1.0]];
    let mut worst_coord = 100usize;
    let mut joint_rates = Vec::new();
    for beta in targets {
        let mut within = vec![0usize; beta.len()];
        let mut joint = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..1000).map(|_| dirichlet_sample(&mut rng, beta)).collect();
            let samples = DMatrix::from_fn(1000, beta.len(), |i, j| rows[i][j]);
            let est = estimate_beta_from_samples(&samples).unwrap();
            let ok: Vec<bool> = est
                .values()
                .iter()
                .zip(beta)
                .map(|(e, b)| ((e - b) / b).abs() <= 0.10)
                .collect();
            for (w, ok) in within.iter_mut().zip(&ok) {
                *w += *ok as usize;
            }
            joint += ok.iter().all(|&o| o) as usize;
        }
        worst_coord = worst_coord.min(*within.iter().min().unwrap());
        joint_rates.push(joint);
    }
    outcome(
        worst_coord >= 95,
        format!("worst per-coordinate hit rate {worst_coord}/100; all-coordinates rates {joint_rates:?}/100"),
    )
}

// 2. Gibbs stationary distribution on the 4-state chain.
fn criterion_2() -> Outcome {
    let (alpha, beta) = (1.0, 0.5);
    let corpus = Corpus::new(
        Vocabulary::new(vec!["a".into(), "b".into()]).unwrap(),
        vec![vec![0], vec![1]],
        vec![],
    )
    .unwrap();
    // p(z) ∝ Π_d α_{z_d} · Π_k [Π_w β^(n_kw rising)] / (Vβ)^(n_k rising)
    let rising = |x: f64, n: usize| (0..n).map(|i| x + i as f64).product::<f64>();
    let weight = |z: [usize; 2]| {
        let mut p = alpha * alpha;
        for k in 0..2 {
            let nkw: Vec<usize> = (0..2).map(|w| (z[w] == k) as usize).collect();
            p *= nkw.iter().map(|&c| rising(beta, c)).product::<f64>() / rising(2.0 * beta, nkw.iter().sum());
        }
        p
    };
    let states = [[0, 0], [0, 1], [1, 0], [1, 1]];
    let w: Vec<f64> = states.iter().map(|&z| weight(z)).collect();
    let total: f64 = w.iter().sum();
    let exact: Vec<f64> = w.iter().map(|x| x / total).collect();

    let mut cfg = LdaConfig::new(2, DirichletParam::symmetric(2, beta).unwrap(), 17).with_symmetric_alpha(alpha);
    cfg.optimize_interval = 0;
    let mut g = Gibbs::new(&corpus, cfg).unwrap();
    for _ in 0..1000 {
        g.sweep().unwrap();
    }
    let sweeps = 100_000;
    let mut visits = [0usize; 4];
    for _ in 0..sweeps {
        g.sweep().unwrap();
        let z = &g.state().z;
        visits[2 * z[0][0] as usize + z[1][0] as usize] += 1;
    }
    let tv: f64 = 0.5
        * visits
            .iter()
            .zip(&exact)
            .map(|(&c, p)| (c as f64 / sweeps as f64 - p).abs())
            .sum::<f64>();
    outcome(tv <= 0.02, format!("total variation {tv:.5} (exact {exact:.4?})"))
}

fn components(w: &DMatrix<f64>) -> usize {
    let n = w.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && w[(i, j)] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

// 4. Spectral invariants on random corpora.
fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut row_err, mut resid, mut scale_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut trivial_bad = 0;
    for _ in 0..50 {
        let v = rng.random_range(8..=60);
        let docs = rng.random_range(10..=40);
        let corpus = random_corpus(&mut rng, docs, v, 2..=12);
        let graph = second_order_graph(&ppmi(&corpus, &WindowStrategy::Document).unwrap());
        let p = transition_matrix(&graph).unwrap();
        for r in p.row_iter() {
            row_err = row_err.max((r.sum() - 1.0).abs());
        }
        let spec = diffusion_spectrum(&graph).unwrap();
        for (k, &l) in spec.eigenvalues.iter().enumerate() {
            let psi = spec.right_vectors.column(k);
            resid = resid.max((&p * psi - psi * l).amax());
        }
        let n = graph.len();
        let comps = components(&graph.w);
        let m = (n - comps).clamp(1, 5);
        let e = diffusion_embed(&graph, m, 1).unwrap();
        let removed_ok = e.trivial_removed == comps
            && spec.eigenvalues[..comps].iter().all(|l| (l - 1.0).abs() <= 1e-8)
            && spec.eigenvalues.get(comps).is_none_or(|l| (l - 1.0).abs() > 1e-8);
        trivial_bad += !removed_ok as usize;
        for c in [0.25, 3.7, 1e3] {
            let scaled =
                SimilarityGraph::from_weights(&graph.w * c, GraphKind::SecondOrderCosine, graph.terms.clone()).unwrap();
            let pc = transition_matrix(&scaled).unwrap();
            scale_err = scale_err.max((&pc - &p).amax());
            let ec = diffusion_embed(&scaled, m, 1).unwrap();
            scale_err = scale_err.max((&ec.coords - &e.coords).amax());
        }
    }
    outcome(
        row_err <= 1e-10 && resid <= 1e-6 && trivial_bad == 0 && scale_err <= 1e-10,
        format!(
            "row-sum error {row_err:.1e}, eigen residual {resid:.1e}, trivial-pair mismatches {trivial_bad}, \
             rescaling error {scale_err:.1e}"
        ),
    )
}

// 5. PPMI / NPMI against explicit context enumeration.
fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let (docs, v) = (rng.random_range(1..=8), rng.random_range(2..=6));
        let corpus = random_corpus(&mut rng, docs, v, 1..=6);
        let v = corpus.num_terms();
        if v < 2 {
            continue;
        }
        let window = if case % 2 == 0 {
            WindowStrategy::Document
        } else {
            WindowStrategy::Sliding(rng.random_range(2..=4))
        };
        // presence vector of every context
        let mut contexts: Vec<Vec<bool>> = Vec::new();
        for doc in corpus.docs() {
            let spans: Vec<&[u32]> = match window {
                WindowStrategy::Sliding(w) if doc.len() > w => doc.windows(w).collect(),
                _ => vec![doc.as_slice()],
            };
            for s in spans {
                let mut present = vec![false; v];
                s.iter().for_each(|&t| present[t as usize] = true);
                contexts.push(present);
            }
        }
        let n = contexts.len() as f64;
        // 2×2 joint probability table for a pair
        let table = |i: usize, j: usize| {
            let mut t = [[0usize; 2]; 2];
            for c in &contexts {
                t[c[i] as usize][c[j] as usize] += 1;
            }
            t.map(|r| r.map(|c| c as f64 / n))
        };
        let p = ppmi(&corpus, &window).unwrap();
        for i in 0..v {
            for j in 0..v {
                let t = table(i, j);
                let (p11, pi, pj) = (t[1][1], t[1][0] + t[1][1], t[0][1] + t[1][1]);
                let want = if p11 == 0.0 {
                    0.0
                } else {
                    (p11 / (pi * pj)).ln().max(0.0)
                };
                worst = worst.max((p.m[(i, j)] - want).abs());
            }
        }
        let words: Vec<String> = corpus.vocab().terms().to_vec();
        let lists = TopicWordLists::new(vec![words]).unwrap();
        let got = npmi_score(&lists, &corpus, &window).unwrap().mean;
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for i in 0..v {
            for j in (i + 1)..v {
                let t = table(i, j);
                let (p11, pi, pj) = (t[1][1], t[1][0] + t[1][1], t[0][1] + t[1][1]);
                sum += if p11 == 0.0 {
                    -1.0
                } else if p11 == 1.0 {
                    1.0
                } else {
                    let pe = p11 + 1e-12;
                    ((pe / (pi * pj)).ln() / -pe.ln()).clamp(-1.0, 1.0)
                };
                pairs += 1.0;
            }
        }
        worst = worst.max((got - sum / pairs).abs());
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.1e} over 200 corpora"))
}

fn small_grid(out: &Path, text: &str, mode: Mode) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.apply(text, None).unwrap();
    cfg.mode = mode;
    cfg.out = out.to_path_buf();
    cfg
}

// 6. Simplex constraints across randomized pipeline runs.
fn criterion_6(tmp: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut failures = Vec::new();
    let bump = |k: &'static str, m: &DMatrix<f64>, worst: &mut BTreeMap<&str, f64>| {
        let e = m.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
        let slot = worst.entry(k).or_insert(0.0);
        *slot = slot.max(e);
    };
    for run in 0..100 {
        let k = rng.random_range(2..=6);
        let v = rng.random_range(20..=100);
        let sparsity = rng.random_range(1.0 / k as f64..=0.5);
        let text = format!(
            "input_format = synthetic\nsynth_topics = {k}\nsynth_vocab = {v}\nsynth_docs = {}\nsynth_doc_len = {}\n\
             synth_sparsity = {sparsity}\nsynth_seed = {run}\ndims = {}\ntopics = {k}\nseeds = {}\n\
             iterations = 20\nburn_in = 5\nmetrics = recovery\n",
            rng.random_range(30..=60),
            rng.random_range(10..=30),
            rng.random_range(2..=6),
            rng.random_range(0..1000),
        );
        let dir = tmp.join(format!("c6/{run}"));
        let cfg = small_grid(&dir, &text, Mode::Prism);
        let m = match run_pipeline(&cfg) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("run {run}: {e}"));
                continue;
            }
        };
        let cell = dir.join(format!("cells/K{k}_seed{}", m.runs[0].seed));
        bump(
            "responsibilities",
            &read_dense(&cell.join("responsibilities.bin")).unwrap(),
            &mut worst,
        );
        bump(
            "topic_word",
            &read_dense(&cell.join("topic_word.bin")).unwrap(),
            &mut worst,
        );
        bump("phi", &read_dense(&cell.join("phi.bin")).unwrap(), &mut worst);
        bump("theta", &read_dense(&cell.join("theta.bin")).unwrap(), &mut worst);
        let corpus = Corpus::read_canonical(&dir.join("corpus")).unwrap();
        let u = unigram(&corpus);
        bump("unigram", &DMatrix::from_row_slice(1, u.len(), u.probs()), &mut worst);
    }
    let tol = [
        ("responsibilities", 1e-8),
        ("topic_word", 1e-8),
        ("phi", 1e-10),
        ("theta", 1e-10),
        ("unigram", 1e-12),
    ];
    let pass = failures.is_empty() && tol.iter().all(|(k, t)| worst.get(k).is_some_and(|e| e <= t));
    let errs: Vec<String> = worst.iter().map(|(k, e)| format!("{k} {e:.1e}")).collect();
    outcome(
        pass,
        format!("max |row sum - 1|: {}; failed runs {failures:?}", errs.join(", ")),
    )
}

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn ranks_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|a| {
            let below = x.iter().filter(|b| *b < a).count() as f64;
            let tied = x.iter().filter(|b| *b == a).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

// 7. Gene-set statistics against direct computation.
fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut hyper_err, mut bh_mismatch, mut rho_err) = (0.0f64, 0usize, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(1..=30u64);
        let m = rng.random_range(0..=n);
        let k = rng.random_range(0..=n);
        let x = rng.random_range(0..=m.min(k) + 1);
        let num: u128 = (x..=m.min(k)).map(|i| binom(m, i) * binom(n - m, k - i)).sum();
        let want = num as f64 / binom(n, k) as f64;
        hyper_err = hyper_err.max((hypergeometric_sf(x, n, m, k) - want).abs());

        // step-up reference: walk ranks from the largest p down, keeping a running minimum
        let len = rng.random_range(1..=20);
        let p: Vec<f64> = (0..len)
            .map(|_| {
                if rng.random_bool(0.3) {
                    rng.random_range(0..4) as f64 / 4.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
        let mut reference = vec![0.0; len];
        let mut cummin = f64::INFINITY;
        for (pos, &i) in order.iter().enumerate() {
            let rank = len - pos;
            cummin = cummin.min(p[i] * (len as f64 / rank as f64));
            reference[i] = cummin.min(1.0);
        }
        bh_mismatch += (bh_adjust(&p) != reference) as usize;

        let cells = rng.random_range(3..=10);
        let genes = rng.random_range(2..=5);
        let values = DMatrix::from_fn(cells, genes, |_, _| rng.random_range(0..4) as f64);
        let names: Vec<String> = (0..genes).map(|g| format!("g{g}")).collect();
        let fm = FeatureMatrix::new(names.clone(), values.clone()).unwrap();
        let cols: Vec<Vec<f64>> = (0..genes).map(|g| ranks_oracle(values.column(g).as_slice())).collect();
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for a in 0..genes {
            for b in (a + 1)..genes {
                sum += pearson(&cols[a], &cols[b]).unwrap_or(0.0);
                pairs += 1.0;
            }
        }
        rho_err = rho_err.max((spearman_coherence(&names, &fm).unwrap() - sum / pairs).abs());
    }
    outcome(
        hyper_err <= 1e-12 && bh_mismatch == 0 && rho_err <= 1e-12,
        format!("hypergeometric error {hyper_err:.1e}, BH mismatches {bh_mismatch}, Spearman error {rho_err:.1e}"),
    )
}

/// 50 topics over 2000 terms, each concentrated on its own 20-word block.
fn block_model(seed: u64) -> TopicModel {
    let (k, v) = (50, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = DMatrix::from_fn(k, v, |_, _| rng.random_range(0.001..0.01));
    for t in 0..k {
        for w in t * 20..t * 20 + 20 {
            phi[(t, w)] = rng.random_range(1.0..2.0);
        }
        let s = phi.row(t).sum();
        phi.row_mut(t).scale_mut(1.0 / s);
    }
    TopicModel {
        phi,
        theta: DMatrix::from_element(1, k, 1.0 / k as f64),
        alpha: vec![0.1; k],
        beta: vec![0.01; v],
        terms: (0..v).map(|i| format!("w{i}")).collect(),
        log_joint: 0.0,
    }
}

// 8. WID calibration with oracle and uniform judges.
fn criterion_8() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [10, 15, 20] {
        let instances: Vec<WidInstance> = (0..200u64)
            .flat_map(|s| build_wid_instances(&block_model(s), &WidConfig::new(n, 1000 + s)).unwrap())
            .collect();
        let oracle = wid_accuracy(
            &instances,
            &mut ScriptedJudge::oracle(&instances),
            FailurePolicy::Incorrect,
        )
        .unwrap()
        .accuracy;
        let random = wid_accuracy(&instances, &mut RandomJudge::new(n as u64), FailurePolicy::Incorrect)
            .unwrap()
            .accuracy;
        let p = 1.0 / (n as f64 + 1.0);
        let se = (p * (1.0 - p) / instances.len() as f64).sqrt();
        let z = (random - p) / se;
        pass &= oracle == 1.0 && z.abs() <= 3.0 && instances.len() == 10_000;
        parts.push(format!(
            "n={n}: {} instances, oracle {oracle}, random {random:.4} (z {z:+.2})",
            instances.len()
        ));
    }
    outcome(pass, parts.join("; "))
}

const PLANTED: &str = "input_format = synthetic
synth_topics = 5
synth_vocab = 300
synth_docs = 500
synth_doc_len = 40
synth_sparsity = 0.24
synth_phi_concentration = 1.0
synth_alpha = 0.2
synth_seed = 2024
topics = 5
";

// 3. Planted-topic recovery; returns the manifests for criterion 10.
fn criterion_3(tmp: &Path) -> (Outcome, Option<(RunManifest, RunManifest)>) {
    let text = format!("{PLANTED}seeds = 1,2,3,4,5,6,7,8,9,10\nmetrics = npmi,recovery\n");
    let prism = run_pipeline(&small_grid(&tmp.join("c3/prism"), &text, Mode::Prism));
    let base = run_pipeline(&small_grid(&tmp.join("c3/plain"), &text, Mode::PlainSymmetric));
    let (prism, base) = match (prism, base) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            return (
                outcome(false, format!("run failed: {:?} / {:?}", a.err(), b.err())),
                None,
            )
        }
    };
    let npmi_of = |m: &RunManifest| m.runs.iter().map(|r| r.metrics["npmi"]).collect::<Vec<_>>();
    let (pn, bn) = (npmi_of(&prism), npmi_of(&base));
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let diff = mean(&pn) - mean(&bn);
    let wins = pn.iter().zip(&bn).filter(|(a, b)| a > b).count();
    let recovery = prism.aggregate["recovery"].mean;
    let base_recovery = base.aggregate["recovery"].mean;
    let pass = diff >= -0.005 && wins >= 7 && recovery >= 0.85;
    (
        outcome(
            pass,
            format!(
                "NPMI prism {:.4} vs plain {:.4} (diff {diff:+.4}, prism ahead in {wins}/10 seeds); \
                 matched cosine prism {recovery:.4} (plain {base_recovery:.4})",
                mean(&pn),
                mean(&bn)
            ),
        ),
        Some((prism, base)),
    )
}

// 9. Ablation modes share upstream artifacts with prism.
fn criterion_9(tmp: &Path) -> Outcome {
    let text = format!("{PLANTED}seeds = 1,2\niterations = 200\nburn_in = 50\nmetrics = npmi\n");
    let mut manifests = BTreeMap::new();
    for mode in [
        Mode::Prism,
        Mode::NoSoc,
        Mode::Svd,
        Mode::RandomPrior,
        Mode::PlainSymmetric,
    ] {
        match run_pipeline(&small_grid(&tmp.join(format!("c9/{mode}")), &text, mode)) {
            Ok(m) => {
                manifests.insert(mode.to_string(), m);
            }
            Err(e) => return outcome(false, format!("{mode} failed: {e}")),
        }
    }
    let prism = &manifests["prism"];
    let same = |m: &RunManifest, key: &str| m.artifacts.get(key) == prism.artifacts.get(key);
    let mut problems = Vec::new();
    for (name, m) in &manifests {
        if m.dataset != prism.dataset || !same(m, "corpus/vocabulary.txt") || !same(m, "corpus/counts.tsv") {
            problems.push(format!("{name}: ingestion digests differ"));
        }
        if name == "prism" {
            continue;
        }
        // first artifact expected to diverge, and the ones that must still match
        let (diverge, shared): (&str, &[&str]) = match name.as_str() {
            "no_soc" => ("graph/similarity.bin", &["cooccurrence/ppmi.bin"]),
            "svd" => (
                "embedding/coords.bin",
                &["cooccurrence/ppmi.bin", "graph/similarity.bin"],
            ),
            _ => ("cells/K5_seed1/beta.txt", &[]),
        };
        if shared.iter().any(|k| !same(m, k)) {
            problems.push(format!("{name}: upstream co-occurrence artifacts differ"));
        }
        if same(m, diverge) {
            problems.push(format!("{name}: `{diverge}` unexpectedly identical"));
        }
        if name == "random_prior" || name == "plain_symmetric" {
            if m.artifacts
                .keys()
                .any(|k| k.starts_with("embedding/") || k.starts_with("graph/"))
            {
                problems.push(format!("{name}: wrote embedding artifacts"));
            }
        }
    }
    outcome(problems.is_empty(), format!("5 modes completed; issues {problems:?}"))
}

fn cell_seconds(m: &RunManifest) -> f64 {
    let total: f64 = m
        .timings
        .iter()
        .filter(|(k, _)| k.starts_with("prior/") || k.starts_with("train/") || k.starts_with("eval/"))
        .map(|(_, v)| v)
        .sum();
    total / m.runs.len() as f64
}

// 10. Runtime of prism cells relative to the symmetric baseline.
fn criterion_10(runs: Option<&(RunManifest, RunManifest)>) -> Outcome {
    let Some((prism, base)) = runs else {
        return outcome(false, "criterion 3 runs unavailable".into());
    };
    let embed: f64 = ["cooccurrence", "graph", "embed"]
        .iter()
        .filter_map(|k| prism.timings.get(*k))
        .sum();
    let (p, b) = (cell_seconds(prism), cell_seconds(base));
    outcome(
        p <= 2.0 * b + embed,
        format!("prism {p:.3}s per cell, plain {b:.3}s per cell, one-time embedding {embed:.3}s"),
    )
}

fn main() {
    // `cargo test` passes libtest flags; only a name filter or `--list` matter here.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let mut failed = 0;
    let mut report = |id: u32, name: &str, blocking: bool, start: Instant, o: Outcome| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if blocking { "" } else { " (informational)" };
        println!(
            "{status} criterion {id:>2} {name}{note}: {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += (!o.pass && blocking) as usize;
    };

    let t = Instant::now();
    report(1, "moment recovery", true, t, criterion_1());
    let t = Instant::now();
    report(2, "gibbs stationary distribution", true, t, criterion_2());
    let t = Instant::now();
    let (c3, runs) = criterion_3(tmp.path());
    report(3, "planted-topic recovery", true, t, c3);
    let t = Instant::now();
    report(4, "spectral invariants", true, t, criterion_4());
    let t = Instant::now();
    report(5, "ppmi/npmi oracle", true, t, criterion_5());
    let t = Instant::now();
    report(6, "simplex suite", true, t, criterion_6(tmp.path()));
    let t = Instant::now();
    report(7, "gene-set oracles", true, t, criterion_7());
    let t = Instant::now();
    report(8, "wid calibration", true, t, criterion_8());
    let t = Instant::now();
    report(9, "ablation plumbing", true, t, criterion_9(tmp.path()));
    let t = Instant::now();
    report(10, "runtime contract", false, t, criterion_10(runs.as_ref()));

    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
