use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::{read_term_list, Corpus, Vocabulary};
use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopwordList {
    None,
    /// The bundled English list.
    English,
    /// One word per line.
    File(PathBuf),
}

impl StopwordList {
    fn load(&self) -> Result<HashSet<String>> {
        Ok(match self {
            StopwordList::None => HashSet::new(),
            StopwordList::English => BUNDLED_STOPWORDS.lines().map(|w| w.trim().to_string()).collect(),
            StopwordList::File(path) => read_term_list(path)?.into_iter().map(|w| w.to_lowercase()).collect(),
        })
    }
}

/// Token and vocabulary filters for raw text.
///
/// Document-frequency bounds are proportions of the number of non-empty
/// documents: a term is kept when `min_df * D <= df <= max_df * D`.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabFilters {
    pub lowercase: bool,
    pub remove_numbers: bool,
    pub remove_punctuation: bool,
    pub min_chars: usize,
    pub min_words_docs: usize,
    pub min_df: f64,
    pub max_df: f64,
    pub max_features: Option<usize>,
    pub stopwords: StopwordList,
}

impl Default for VocabFilters {
    fn default() -> Self {
        VocabFilters {
            lowercase: true,
            remove_numbers: true,
            remove_punctuation: true,
            min_chars: 3,
            min_words_docs: 3,
            min_df: 0.01,
            max_df: 0.9,
            max_features: Some(2000),
            stopwords: StopwordList::English,
        }
    }
}

impl VocabFilters {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_df) || !(0.0..=1.0).contains(&self.max_df) || self.min_df >= self.max_df {
            return Err(Error::Config(format!(
                "document-frequency bounds must satisfy 0 <= min_df < max_df <= 1 (got {} and {})",
                self.min_df, self.max_df
            )));
        }
        if self.max_features == Some(0) {
            return Err(Error::Config("max_features must be positive".into()));
        }
        Ok(())
    }

    fn tokenize(&self, text: &str, stop: &HashSet<String>) -> Vec<String> {
        let text = if self.lowercase {
            text.to_lowercase()
        } else {
            text.to_string()
        };
        let cleaned: String = if self.remove_punctuation {
            text.chars()
                .map(|c| {
                    if c.is_alphanumeric() || c.is_whitespace() {
                        c
                    } else {
                        ' '
                    }
                })
                .collect()
        } else {
            text
        };
        cleaned
            .split_whitespace()
            .filter(|t| !(self.remove_numbers && t.chars().any(|c| c.is_numeric())))
            .filter(|t| t.chars().count() >= self.min_chars)
            .filter(|t| !stop.contains(*t))
            .map(str::to_string)
            .collect()
    }
}

fn read_documents(path: &Path) -> Result<Vec<String>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .filter(|p| {
                !p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with('.'))
            })
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| fs::read_to_string(f).map_err(|e| Error::io(f, e)))
            .collect()
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(text.lines().map(str::to_string).collect())
    }
}

/// Reads raw UTF-8 text (a directory with one document per file, or a file
/// with one document per line) and applies `filters`. The resulting
/// vocabulary is sorted lexicographically.
pub fn ingest_plaintext(path: &Path, filters: &VocabFilters) -> Result<Corpus> {
    filters.validate()?;
    let stop = filters.stopwords.load()?;
    let raw = read_documents(path)?;
    let tokenized: Vec<Vec<String>> = raw
        .iter()
        .map(|doc| filters.tokenize(doc, &stop))
        .filter(|doc| !doc.is_empty())
        .collect();
    if tokenized.is_empty() {
        return Err(Error::Data(format!("{}: no tokens survive filtering", path.display())));
    }
    let n_docs = tokenized.len() as f64;

    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in &tokenized {
        let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut candidates: Vec<(&str, usize)> = df
        .into_iter()
        .filter(|&(_, f)| {
            let f = f as f64;
            f >= filters.min_df * n_docs && f <= filters.max_df * n_docs
        })
        .collect();
    // highest df first, ties lexicographic
    candidates.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(cap) = filters.max_features {
        candidates.truncate(cap);
    }
    let mut terms: Vec<String> = candidates.into_iter().map(|(t, _)| t.to_string()).collect();
    terms.sort_unstable();
    let vocab = Vocabulary::new(terms)?;

    let docs: Vec<Vec<u32>> = tokenized
        .iter()
        .map(|doc| doc.iter().filter_map(|t| vocab.id(t).map(|i| i as u32)).collect())
        .filter(|doc: &Vec<u32>| doc.len() >= filters.min_words_docs.max(1))
        .collect();
    if docs.is_empty() {
        return Err(Error::Data(format!(
            "{}: every document dropped by filters",
            path.display()
        )));
    }
    Corpus::new(vocab, docs, Vec::new())
}
