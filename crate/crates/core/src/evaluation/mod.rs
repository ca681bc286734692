//! Topic quality metrics: NPMI and c_v coherence, word intrusion, and
//! gene-set statistics for expression corpora.

mod coherence;
mod geneset;
mod report;
mod wid;

use std::collections::HashSet;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::sampler::TopicModel;

pub use coherence::{cv_score, npmi, npmi_score, CoherenceScores, DEFAULT_CV_WINDOW, DEFAULT_NPMI_WINDOW, NPMI_EPS};
pub use geneset::{
    bh_adjust, gene_set_metrics, hypergeometric_sf, spearman, spearman_coherence, CoverageMean, Enrichment,
    GeneSetReport, PathwayDb, TopicGeneSet, Q_THRESHOLD,
};
pub use report::Report;
pub use wid::{
    build_wid_instances, render_prompt, wid_accuracy, EmbeddingJudge, FailurePolicy, Judge, JudgeRequest, RandomJudge,
    ScriptedJudge, SubprocessJudge, WidConfig, WidInstance, WidResult,
};

/// Ranked top-n term lists, one per topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicWordLists {
    pub topics: Vec<Vec<String>>,
}

impl TopicWordLists {
    /// Rejects duplicate terms within a topic and topics with fewer than two words.
    pub fn new(topics: Vec<Vec<String>>) -> Result<Self> {
        if topics.is_empty() {
            return Err(Error::Data("no topics to evaluate".into()));
        }
        for (t, words) in topics.iter().enumerate() {
            if words.len() < 2 {
                return Err(Error::Data(format!(
                    "topic {t} has {} word(s); need at least 2",
                    words.len()
                )));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = words.iter().find(|w| !seen.insert(w.as_str())) {
                return Err(Error::Data(format!("topic {t} lists `{dup}` twice")));
            }
        }
        Ok(TopicWordLists { topics })
    }

    pub fn from_model(model: &TopicModel, n: usize) -> Result<Self> {
        TopicWordLists::new(model.top_terms(n))
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// Keeps only the first `n` words of every topic.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        TopicWordLists::new(
            self.topics
                .iter()
                .map(|t| t.iter().take(n).cloned().collect())
                .collect(),
        )
    }

    /// Term ids in `vocab`; fails on the first unknown term.
    pub fn resolve(&self, vocab: &Vocabulary) -> Result<Vec<Vec<usize>>> {
        self.topics
            .iter()
            .map(|words| {
                words
                    .iter()
                    .map(|w| {
                        vocab
                            .id(w)
                            .ok_or_else(|| Error::Data(format!("`{w}` is not in the reference vocabulary")))
                    })
                    .collect()
            })
            .collect()
    }
}
