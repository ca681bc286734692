use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use statrs::function::factorial::ln_binomial;

use super::TopicWordLists;
use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};

/// Pathways with `q` below this are significant.
pub const Q_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct PathwayDb {
    pub pathways: Vec<(String, Vec<String>)>,
}

impl PathwayDb {
    pub fn new(pathways: Vec<(String, Vec<String>)>) -> Result<Self> {
        if pathways.is_empty() {
            return Err(Error::Data("pathway database is empty".into()));
        }
        let pathways = pathways
            .into_iter()
            .map(|(name, genes)| {
                let mut seen = HashSet::new();
                let genes: Vec<String> = genes.into_iter().filter(|g| seen.insert(g.clone())).collect();
                (name, genes)
            })
            .collect();
        Ok(PathwayDb { pathways })
    }

    /// `name<TAB>gene1,gene2,…` per line.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pathways = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (name, genes) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected name<TAB>genes"))?;
            let genes: Vec<String> = genes
                .split(',')
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(String::from)
                .collect();
            if genes.is_empty() {
                return Err(Error::parse(path, i + 1, format!("pathway `{name}` has no genes")));
            }
            pathways.push((name.to_string(), genes));
        }
        PathwayDb::new(pathways)
    }

    pub fn max_size(&self) -> usize {
        self.pathways.iter().map(|(_, g)| g.len()).max().unwrap_or(0)
    }
}

/// `P(X >= x)` for `X ~ Hypergeometric(N, M, K)`: `K` draws from `N` items of
/// which `M` are marked.
pub fn hypergeometric_sf(x: u64, n: u64, m: u64, k: u64) -> f64 {
    if x == 0 {
        return 1.0;
    }
    let hi = k.min(m);
    let lo = k.saturating_sub(n - m);
    if x > hi {
        return 0.0;
    }
    let start = x.max(lo);
    let ln_total = ln_binomial(n, k);
    let mut term = (ln_binomial(m, start) + ln_binomial(n - m, k - start) - ln_total).exp();
    let mut sum = term;
    for i in start..hi {
        // pmf(i + 1) / pmf(i)
        term *= ((m - i) * (k - i)) as f64 / ((i + 1) * (n - m + i + 1 - k)) as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * (m as f64 / (rank + 1) as f64));
        q[i] = running.min(1.0);
    }
    q
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's ρ with average ranks for ties; `None` if either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    }
}

fn gene_columns(genes: &[String], expression: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    genes
        .iter()
        .map(|g| {
            let j = expression
                .gene_index(g)
                .ok_or_else(|| Error::Data(format!("gene `{g}` is not in the expression matrix")))?;
            Ok(expression.column(j))
        })
        .collect()
}

/// Mean Spearman correlation over unordered gene pairs across cells. Pairs
/// with a constant gene contribute 0.
pub fn spearman_coherence(genes: &[String], expression: &FeatureMatrix) -> Result<f64> {
    if genes.len() < 2 {
        return Err(Error::Data("coherence needs at least 2 genes".into()));
    }
    if expression.cells() < 3 {
        return Err(Error::Data(format!(
            "coherence needs at least 3 cells, got {}",
            expression.cells()
        )));
    }
    let cols = gene_columns(genes, expression)?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..cols.len() {
        for b in (a + 1)..cols.len() {
            total += spearman(&cols[a], &cols[b]).unwrap_or_else(|| {
                log::warn!(
                    "constant expression in pair ({}, {}); using rho = 0",
                    genes[a],
                    genes[b]
                );
                0.0
            });
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enrichment {
    pub pathway: String,
    pub overlap: usize,
    pub size: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicGeneSet {
    pub coherence: f64,
    /// Significant pathways, smallest `q` first.
    pub enriched: Vec<Enrichment>,
    pub coverage: f64,
    /// `−log10` of the smallest `q`; `None` when nothing is significant.
    pub strength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneSetReport {
    pub topics: Vec<TopicGeneSet>,
    pub mean_coherence: f64,
    pub mean_coverage: f64,
    /// Mean strength over topics that have one.
    pub mean_strength: Option<f64>,
    pub enriched_topics: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMean {
    Simple,
    SizeWeighted,
}

fn topic_metrics(
    genes: &[String],
    expression: &FeatureMatrix,
    db: &PathwayDb,
    universe: usize,
    coverage_mean: CoverageMean,
) -> Result<TopicGeneSet> {
    let coherence = spearman_coherence(genes, expression)?;
    let set: HashSet<&str> = genes.iter().map(String::as_str).collect();
    let overlaps: Vec<usize> = db
        .pathways
        .iter()
        .map(|(_, p)| p.iter().filter(|g| set.contains(g.as_str())).count())
        .collect();
    let p: Vec<f64> = db
        .pathways
        .iter()
        .zip(&overlaps)
        .map(|((_, members), &x)| {
            hypergeometric_sf(x as u64, universe as u64, members.len() as u64, genes.len() as u64)
        })
        .collect();
    let q = bh_adjust(&p);
    let mut enriched: Vec<Enrichment> = (0..p.len())
        .filter(|&i| q[i] < Q_THRESHOLD)
        .map(|i| Enrichment {
            pathway: db.pathways[i].0.clone(),
            overlap: overlaps[i],
            size: db.pathways[i].1.len(),
            p: p[i],
            q: q[i],
        })
        .collect();
    enriched.sort_by(|a, b| a.q.total_cmp(&b.q).then(a.p.total_cmp(&b.p)));
    let coverage = if enriched.is_empty() {
        0.0
    } else {
        match coverage_mean {
            CoverageMean::Simple => {
                enriched.iter().map(|e| e.overlap as f64 / e.size as f64).sum::<f64>() / enriched.len() as f64
            }
            CoverageMean::SizeWeighted => {
                enriched.iter().map(|e| e.overlap).sum::<usize>() as f64
                    / enriched.iter().map(|e| e.size).sum::<usize>() as f64
            }
        }
    };
    let strength = enriched.first().map(|e| -e.q.log10());
    Ok(TopicGeneSet {
        coherence,
        enriched,
        coverage,
        strength,
    })
}

/// Enrichment, coherence and coverage for every topic's gene list.
pub fn gene_set_metrics(
    lists: &TopicWordLists,
    expression: &FeatureMatrix,
    db: &PathwayDb,
    universe: usize,
    coverage_mean: CoverageMean,
) -> Result<GeneSetReport> {
    if universe < db.max_size() {
        return Err(Error::Data(format!(
            "universe of {universe} genes is smaller than the largest pathway ({})",
            db.max_size()
        )));
    }
    if let Some(t) = lists.topics.iter().find(|t| t.len() > universe) {
        return Err(Error::Data(format!(
            "gene set of {} exceeds the universe of {universe}",
            t.len()
        )));
    }
    let topics = lists
        .topics
        .par_iter()
        .map(|genes| topic_metrics(genes, expression, db, universe, coverage_mean))
        .collect::<Result<Vec<_>>>()?;
    let k = topics.len() as f64;
    let strengths: Vec<f64> = topics.iter().filter_map(|t| t.strength).collect();
    Ok(GeneSetReport {
        mean_coherence: topics.iter().map(|t| t.coherence).sum::<f64>() / k,
        mean_coverage: topics.iter().map(|t| t.coverage).sum::<f64>() / k,
        mean_strength: (!strengths.is_empty()).then(|| strengths.iter().sum::<f64>() / strengths.len() as f64),
        enriched_topics: strengths.len(),
        topics,
    })
}
