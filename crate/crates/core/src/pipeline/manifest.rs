use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

/// Metrics of one (K, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub k: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub mode: String,
    /// Digest of the ingested corpus.
    pub dataset: String,
    pub config: BTreeMap<String, String>,
    /// Output-relative artifact path → sha256.
    pub artifacts: BTreeMap<String, String>,
    pub selected_dims: Option<usize>,
    pub runs: Vec<RunRecord>,
    /// Per K: mean and std over seeds.
    pub per_k: BTreeMap<usize, BTreeMap<String, Summary>>,
    /// Mean and std over K of the per-K means.
    pub aggregate: BTreeMap<String, Summary>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// Mean over seeds per K, then mean and std over K. A metric missing from
/// some runs is averaged over the runs that have it.
pub fn aggregate_runs(runs: &[RunRecord]) -> (BTreeMap<usize, BTreeMap<String, Summary>>, BTreeMap<String, Summary>) {
    let mut by_k: BTreeMap<usize, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in runs {
        let slot = by_k.entry(r.k).or_default();
        for (m, v) in &r.metrics {
            slot.entry(m.clone()).or_default().push(*v);
        }
    }
    let per_k: BTreeMap<usize, BTreeMap<String, Summary>> = by_k
        .into_iter()
        .map(|(k, ms)| (k, ms.into_iter().map(|(m, v)| (m, Summary::of(&v))).collect()))
        .collect();
    let mut over_k: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ms in per_k.values() {
        for (m, s) in ms {
            over_k.entry(m.clone()).or_default().push(s.mean);
        }
    }
    let aggregate = over_k.into_iter().map(|(m, v)| (m, Summary::of(&v))).collect();
    (per_k, aggregate)
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    /// The manifest with timings cleared, for reproducibility checks.
    pub fn without_timings(&self) -> RunManifest {
        RunManifest {
            timings: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn metric_names(&self) -> BTreeSet<String> {
        self.aggregate.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub summaries: Vec<Summary>,
    /// Highest mean (ties share); unset when every mean is equal.
    pub best: Vec<bool>,
    pub second: Vec<bool>,
    /// `mean(first) − mean(i)`.
    pub diff_vs_first: Vec<f64>,
    /// First run's mean is strictly higher than run `i`'s.
    pub first_outperforms: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub names: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Per-metric comparison of aggregated means. The first manifest is the
/// subject; differences and outperformance indicators are relative to it.
/// Higher is better for every metric.
pub fn compare_runs(named: &[(String, RunManifest)]) -> Result<Comparison> {
    let Some((_, first)) = named.first() else {
        return Err(Error::Config("nothing to compare".into()));
    };
    let metrics = first.metric_names();
    for (name, m) in named {
        if m.metric_names() != metrics {
            return Err(Error::Data(format!(
                "`{name}` reports metrics {:?}, expected {:?}",
                m.metric_names(),
                metrics
            )));
        }
        if m.dataset != first.dataset {
            log::warn!("`{name}` was run on a different dataset");
        }
    }
    let rows = metrics
        .iter()
        .map(|metric| {
            let summaries: Vec<Summary> = named.iter().map(|(_, m)| m.aggregate[metric]).collect();
            let mut distinct: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
            distinct.sort_by(|a, b| b.total_cmp(a));
            distinct.dedup();
            let top = (distinct.len() > 1).then(|| distinct[0]);
            let runner = distinct.get(1).copied().filter(|_| top.is_some());
            let base = summaries[0].mean;
            ComparisonRow {
                metric: metric.clone(),
                best: summaries.iter().map(|s| Some(s.mean) == top).collect(),
                second: summaries.iter().map(|s| Some(s.mean) == runner).collect(),
                diff_vs_first: summaries.iter().map(|s| base - s.mean).collect(),
                first_outperforms: summaries.iter().map(|s| base > s.mean).collect(),
                summaries,
            }
        })
        .collect();
    Ok(Comparison {
        names: named.iter().map(|(n, _)| n.clone()).collect(),
        rows,
    })
}

impl Comparison {
    /// Tab-separated table: `mean (std)` per run, `*` best, `**` second best;
    /// the diff column lists `mean(first) − mean(run)` and a `†` when the
    /// first run is ahead.
    pub fn render(&self) -> String {
        let mut s = String::from("metric");
        for n in &self.names {
            write!(s, "\t{n}").unwrap();
        }
        for n in self.names.iter().skip(1) {
            write!(s, "\t{} - {n}", self.names[0]).unwrap();
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.metric);
            for (i, sm) in row.summaries.iter().enumerate() {
                let flag = if row.best[i] {
                    "*"
                } else if row.second[i] {
                    "**"
                } else {
                    ""
                };
                write!(s, "\t{:.4} ({:.4}){flag}", sm.mean, sm.std).unwrap();
            }
            for i in 1..row.summaries.len() {
                let dagger = if row.first_outperforms[i] { " †" } else { "" };
                write!(s, "\t{:+.4}{dagger}", row.diff_vs_first[i]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}
