//! Bag-of-words corpora.
//!
//! A [`Corpus`] is immutable once built: a [`Vocabulary`] with dense ids, the
//! per-document token-id sequences, and a CSR matrix of document-term counts.
//! Every constructor drops empty documents and prunes vocabulary terms that
//! never occur, so downstream stages can rely on `count(w) > 0` for every id.

mod expression;
mod plaintext;

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub use expression::{ingest_expression_matrix, FeatureMatrix};
pub use plaintext::{ingest_plaintext, StopwordList, VocabFilters};

/// Ordered set of unique terms with dense ids in `[0, V)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from terms in id order. Duplicates are rejected.
    pub fn new(terms: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        for (id, term) in terms.iter().enumerate() {
            if term.is_empty() {
                return Err(Error::Data(format!("empty term at id {id}")));
            }
            if index.insert(term.clone(), id).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary term `{term}`")));
            }
        }
        Ok(Vocabulary { terms, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Compressed sparse rows of nonnegative integer counts, columns sorted per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCounts {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<u32>,
    cols: usize,
}

impl SparseCounts {
    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `(column, count)` pairs of row `r` in ascending column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&(c as u32)) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }

    fn from_docs(docs: &[Vec<u32>], cols: usize) -> Self {
        let mut indptr = Vec::with_capacity(docs.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for doc in docs {
            let mut sorted = doc.clone();
            sorted.sort_unstable();
            for chunk in sorted.chunk_by(|a, b| a == b) {
                indices.push(chunk[0]);
                values.push(chunk.len() as u32);
            }
            indptr.push(indices.len());
        }
        SparseCounts {
            indptr,
            indices,
            values,
            cols,
        }
    }
}

/// Immutable bag-of-words corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    vocab: Vocabulary,
    docs: Vec<Vec<u32>>,
    counts: SparseCounts,
    metadata: Vec<Vec<String>>,
    dropped_docs: usize,
}

impl Corpus {
    /// Assembles a corpus from token-id documents.
    ///
    /// Empty documents are dropped (counted in [`Corpus::dropped_docs`]) and
    /// terms that never occur are pruned from the vocabulary, with ids remapped
    /// in their original relative order. `metadata`, when non-empty, must have
    /// one entry per input document.
    pub fn new(vocab: Vocabulary, docs: Vec<Vec<u32>>, metadata: Vec<Vec<String>>) -> Result<Self> {
        if !metadata.is_empty() && metadata.len() != docs.len() {
            return Err(Error::Data(format!(
                "{} metadata rows for {} documents",
                metadata.len(),
                docs.len()
            )));
        }
        let v = vocab.len();
        let mut term_counts = vec![0u64; v];
        for (d, doc) in docs.iter().enumerate() {
            for &w in doc {
                let w = w as usize;
                if w >= v {
                    return Err(Error::Data(format!(
                        "document {d} has token id {w} outside vocabulary of size {v}"
                    )));
                }
                term_counts[w] += 1;
            }
        }

        let has_meta = !metadata.is_empty();
        let mut kept_docs = Vec::with_capacity(docs.len());
        let mut kept_meta = Vec::new();
        let mut dropped = 0;
        for (doc, meta) in docs
            .into_iter()
            .zip(metadata.into_iter().map(Some).chain(std::iter::repeat(None)))
        {
            if doc.is_empty() {
                dropped += 1;
                continue;
            }
            kept_docs.push(doc);
            if has_meta {
                kept_meta.push(meta.unwrap_or_default());
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} empty document(s)");
        }
        if kept_docs.is_empty() {
            return Err(Error::Data("corpus is empty: every document dropped".into()));
        }

        // prune unused terms
        let (vocab, kept_docs) = if term_counts.iter().any(|&c| c == 0) {
            let mut remap = vec![u32::MAX; v];
            let mut terms = Vec::new();
            for (w, &c) in term_counts.iter().enumerate() {
                if c > 0 {
                    remap[w] = terms.len() as u32;
                    terms.push(vocab.term(w).to_string());
                }
            }
            log::warn!("pruned {} vocabulary term(s) with zero count", v - terms.len());
            let docs = kept_docs
                .into_iter()
                .map(|doc| doc.into_iter().map(|w| remap[w as usize]).collect())
                .collect();
            (Vocabulary::new(terms)?, docs)
        } else {
            (vocab, kept_docs)
        };

        if vocab.len() < 2 {
            return Err(Error::Data(format!(
                "vocabulary must contain at least 2 terms, found {}",
                vocab.len()
            )));
        }
        let counts = SparseCounts::from_docs(&kept_docs, vocab.len());
        Ok(Corpus {
            vocab,
            docs: kept_docs,
            counts,
            metadata: kept_meta,
            dropped_docs: dropped,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn num_terms(&self) -> usize {
        self.vocab.len()
    }

    pub fn docs(&self) -> &[Vec<u32>] {
        &self.docs
    }

    pub fn doc(&self, d: usize) -> &[u32] {
        &self.docs[d]
    }

    pub fn counts(&self) -> &SparseCounts {
        &self.counts
    }

    pub fn nnz(&self) -> usize {
        self.counts.nnz()
    }

    pub fn total_tokens(&self) -> u64 {
        self.counts.total()
    }

    /// Extra columns carried by the input (e.g. OCTIS partition labels).
    pub fn metadata(&self) -> &[Vec<String>] {
        &self.metadata
    }

    /// Documents dropped as empty while building this corpus.
    pub fn dropped_docs(&self) -> usize {
        self.dropped_docs
    }

    pub fn term_counts(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.num_terms()];
        for d in 0..self.num_docs() {
            for (w, c) in self.counts.row(d) {
                out[w] += c as u64;
            }
        }
        out
    }

    /// Drops documents with fewer than `min_words` tokens and prunes terms
    /// left without occurrences. Applying it twice changes nothing.
    pub fn drop_short_documents(&self, min_words: usize) -> Result<Corpus> {
        let has_meta = !self.metadata.is_empty();
        let mut docs = Vec::new();
        let mut meta = Vec::new();
        for (d, doc) in self.docs.iter().enumerate() {
            if doc.len() >= min_words.max(1) {
                docs.push(doc.clone());
                if has_meta {
                    meta.push(self.metadata[d].clone());
                }
            }
        }
        let dropped = self.num_docs() - docs.len();
        if dropped > 0 {
            log::warn!("dropped {dropped} document(s) shorter than {min_words} tokens");
        }
        let mut out = Corpus::new(self.vocab.clone(), docs, meta)?;
        out.dropped_docs += dropped;
        Ok(out)
    }

    /// Writes the canonical form: `vocabulary.txt` plus `counts.tsv` triplets,
    /// and `tokens.txt` (one line of space-separated word ids per document)
    /// so token order survives a round trip.
    pub fn write_canonical(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let vocab_path = dir.join("vocabulary.txt");
        let mut f = BufWriter::new(fs::File::create(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?);
        for t in self.vocab.terms() {
            writeln!(f, "{t}").map_err(|e| Error::io(&vocab_path, e))?;
        }
        f.flush().map_err(|e| Error::io(&vocab_path, e))?;

        let counts_path = dir.join("counts.tsv");
        let mut f = BufWriter::new(fs::File::create(&counts_path).map_err(|e| Error::io(&counts_path, e))?);
        let io = |e| Error::io(&counts_path, e);
        writeln!(f, "doc_id\tword_id\tcount").map_err(io)?;
        for d in 0..self.num_docs() {
            for (w, c) in self.counts.row(d) {
                writeln!(f, "{d}\t{w}\t{c}").map_err(|e| Error::io(&counts_path, e))?;
            }
        }
        f.flush().map_err(|e| Error::io(&counts_path, e))?;

        let tokens_path = dir.join("tokens.txt");
        let mut f = BufWriter::new(fs::File::create(&tokens_path).map_err(|e| Error::io(&tokens_path, e))?);
        for doc in &self.docs {
            let line: Vec<String> = doc.iter().map(u32::to_string).collect();
            writeln!(f, "{}", line.join(" ")).map_err(|e| Error::io(&tokens_path, e))?;
        }
        f.flush().map_err(|e| Error::io(&tokens_path, e))
    }

    /// Reads the canonical form written by [`Corpus::write_canonical`].
    /// Token order comes from `tokens.txt` when present (it must agree with
    /// the counts); otherwise each document is rebuilt in ascending word id.
    pub fn read_canonical(dir: &Path) -> Result<Corpus> {
        let vocab = Vocabulary::new(read_term_list(&dir.join("vocabulary.txt"))?)?;
        let counts_path = dir.join("counts.tsv");
        let file = fs::File::open(&counts_path).map_err(|e| Error::io(&counts_path, e))?;
        let mut docs: Vec<Vec<u32>> = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&counts_path, e))?;
            if i == 0 && line.starts_with("doc_id") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    &counts_path,
                    i + 1,
                    "expected doc_id<TAB>word_id<TAB>count",
                ));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::parse(&counts_path, i + 1, e.to_string()))
            };
            let (d, w, c) = (parse(fields[0])? as usize, parse(fields[1])?, parse(fields[2])?);
            if w as usize >= vocab.len() {
                return Err(Error::parse(&counts_path, i + 1, format!("word id {w} out of range")));
            }
            if docs.len() <= d {
                docs.resize(d + 1, Vec::new());
            }
            docs[d].extend(std::iter::repeat_n(w as u32, c as usize));
        }
        let tokens_path = dir.join("tokens.txt");
        if tokens_path.exists() {
            let ordered = read_token_lines(&tokens_path, vocab.len())?;
            let mut sorted = ordered.clone();
            sorted.iter_mut().for_each(|d| d.sort_unstable());
            docs.iter_mut().for_each(|d| d.sort_unstable());
            docs.resize(sorted.len().max(docs.len()), Vec::new());
            if sorted != docs {
                return Err(Error::Data(format!(
                    "{} disagrees with {}",
                    tokens_path.display(),
                    counts_path.display()
                )));
            }
            return Corpus::new(vocab, ordered, Vec::new());
        }
        for doc in &mut docs {
            doc.sort_unstable();
        }
        Corpus::new(vocab, docs, Vec::new())
    }
}

fn read_token_lines(path: &Path, v: usize) -> Result<Vec<Vec<u32>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|t| match t.parse::<u32>() {
                    Ok(w) if (w as usize) < v => Ok(w),
                    _ => Err(Error::parse(path, i + 1, format!("bad word id `{t}`"))),
                })
                .collect()
        })
        .collect()
}

/// Token frequencies `p(w) = count(w) / total tokens`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramDistribution {
    p: Vec<f64>,
}

impl UnigramDistribution {
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Data("unigram distribution of an empty count vector".into()));
        }
        let total = total as f64;
        Ok(UnigramDistribution {
            p: counts.iter().map(|&c| c as f64 / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

pub fn unigram(corpus: &Corpus) -> UnigramDistribution {
    UnigramDistribution::from_counts(&corpus.term_counts()).expect("corpus has at least one token")
}

pub(crate) fn read_term_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Reads an OCTIS corpus: one document per line, text in the first
/// tab-separated column, whitespace-separated tokens. With a vocabulary file
/// the vocabulary follows the file order and out-of-vocabulary tokens are
/// dropped; without one it is the sorted set of observed tokens.
pub fn ingest_octis(corpus_file: &Path, vocab_file: Option<&Path>) -> Result<Corpus> {
    let text = fs::read_to_string(corpus_file).map_err(|e| Error::io(corpus_file, e))?;
    if text.trim().is_empty() {
        return Err(Error::Data(format!("{} is empty", corpus_file.display())));
    }
    let mut raw_docs = Vec::new();
    let mut metadata = Vec::new();
    for line in text.lines() {
        let mut cols = line.split('\t');
        let body = cols.next().unwrap_or("");
        raw_docs.push(body.split_whitespace().collect::<Vec<_>>());
        metadata.push(cols.map(str::to_string).collect::<Vec<_>>());
    }
    // a trailing newline is not a blank document
    let vocab = match vocab_file {
        Some(path) => Vocabulary::new(read_term_list(path)?)?,
        None => {
            let mut terms: Vec<String> = raw_docs.iter().flatten().map(|t| t.to_string()).collect();
            terms.sort_unstable();
            terms.dedup();
            Vocabulary::new(terms)?
        }
    };
    let docs: Vec<Vec<u32>> = raw_docs
        .iter()
        .map(|doc| doc.iter().filter_map(|t| vocab.id(t).map(|id| id as u32)).collect())
        .collect();
    Corpus::new(vocab, docs, metadata)
}
