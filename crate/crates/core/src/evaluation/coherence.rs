use rayon::prelude::*;

use super::TopicWordLists;
use crate::cooccurrence::{for_each_context, WindowStrategy};
use crate::corpus::Corpus;
use crate::error::Result;

pub const NPMI_EPS: f64 = 1e-12;
pub const DEFAULT_NPMI_WINDOW: usize = 10;
pub const DEFAULT_CV_WINDOW: usize = 110;

/// Per-topic scores and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceScores {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

impl CoherenceScores {
    fn new(per_topic: Vec<f64>) -> Self {
        let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
        CoherenceScores { per_topic, mean }
    }
}

/// NPMI from context counts.
///
/// A pair that never co-occurs scores −1; a pair present in every context
/// scores 1. Otherwise `ε` is added to the joint inside both logarithms and
/// the result is clamped to `[−1, 1]`.
pub fn npmi(joint: u64, df_i: u64, df_j: u64, contexts: u64) -> f64 {
    if joint == 0 {
        return -1.0;
    }
    if joint == contexts {
        return 1.0;
    }
    let c = contexts as f64;
    let pij = joint as f64 / c + NPMI_EPS;
    let pmi = (pij / ((df_i as f64 / c) * (df_j as f64 / c))).ln();
    (pmi / -pij.ln()).clamp(-1.0, 1.0)
}

/// Joint context counts between a few row terms and the whole vocabulary.
struct RowCounts {
    contexts: u64,
    df: Vec<u64>,
    row_of: Vec<Option<usize>>,
    joint: Vec<u64>,
    v: usize,
}

impl RowCounts {
    fn compute(corpus: &Corpus, strategy: &WindowStrategy, rows: &[usize]) -> Result<Self> {
        let v = corpus.num_terms();
        let mut row_of = vec![None; v];
        for (r, &w) in rows.iter().enumerate() {
            row_of[w] = Some(r);
        }
        let mut counts = RowCounts {
            contexts: 0,
            df: vec![0; v],
            row_of,
            joint: vec![0; rows.len() * v],
            v,
        };
        for_each_context(corpus, strategy, |ctx| {
            counts.contexts += 1;
            for &w in ctx {
                counts.df[w as usize] += 1;
                if let Some(r) = counts.row_of[w as usize] {
                    let row = &mut counts.joint[r * v..(r + 1) * v];
                    for &x in ctx {
                        row[x as usize] += 1;
                    }
                }
            }
        })?;
        Ok(counts)
    }

    fn npmi(&self, i: usize, j: usize) -> f64 {
        let r = self.row_of[i].expect("row term");
        npmi(self.joint[r * self.v + j], self.df[i], self.df[j], self.contexts)
    }

    /// NPMI of `i` against every term, 0 where the pair never co-occurs.
    fn context_vector(&self, i: usize) -> Vec<f64> {
        let r = self.row_of[i].expect("row term");
        (0..self.v)
            .map(|j| {
                let joint = self.joint[r * self.v + j];
                if joint == 0 {
                    0.0
                } else {
                    npmi(joint, self.df[i], self.df[j], self.contexts)
                }
            })
            .collect()
    }
}

fn row_terms(ids: &[Vec<usize>]) -> Vec<usize> {
    let mut rows: Vec<usize> = ids.iter().flatten().copied().collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| ((a + 1)..n).map(move |b| (a, b)))
}

/// Mean pairwise NPMI of each topic's words over `window` contexts of `reference`.
pub fn npmi_score(lists: &TopicWordLists, reference: &Corpus, window: &WindowStrategy) -> Result<CoherenceScores> {
    let ids = lists.resolve(reference.vocab())?;
    let counts = RowCounts::compute(reference, window, &row_terms(&ids))?;
    let per_topic = ids
        .par_iter()
        .map(|words| {
            let n = words.len();
            let total: f64 = pairs(n).map(|(a, b)| counts.npmi(words[a], words[b])).sum();
            total / (n * (n - 1) / 2) as f64
        })
        .collect();
    Ok(CoherenceScores::new(per_topic))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// c_v coherence: mean over word pairs of `NPMI(w_i, w_j) · cos(v_i, v_j)`,
/// where `v_i` holds the NPMI of `w_i` against every reference term, all
/// counted in sliding windows of length `sliding_window`.
pub fn cv_score(lists: &TopicWordLists, reference: &Corpus, sliding_window: usize) -> Result<CoherenceScores> {
    let window = WindowStrategy::Sliding(sliding_window);
    window.validate(reference)?;
    let ids = lists.resolve(reference.vocab())?;
    let counts = RowCounts::compute(reference, &window, &row_terms(&ids))?;
    let per_topic = ids
        .par_iter()
        .map(|words| {
            let vectors: Vec<Vec<f64>> = words.iter().map(|&w| counts.context_vector(w)).collect();
            let n = words.len();
            let total: f64 = pairs(n)
                .map(|(a, b)| counts.npmi(words[a], words[b]) * cosine(&vectors[a], &vectors[b]))
                .sum();
            total / (n * (n - 1) / 2) as f64
        })
        .collect();
    Ok(CoherenceScores::new(per_topic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn corpus(terms: &[&str], docs: &[&[usize]]) -> Corpus {
        let vocab = Vocabulary::new(terms.iter().map(|s| s.to_string()).collect()).unwrap();
        Corpus::new(
            vocab,
            docs.iter().map(|d| d.iter().map(|&w| w as u32).collect()).collect(),
            vec![],
        )
        .unwrap()
    }

    fn lists(t: &[&[&str]]) -> TopicWordLists {
        TopicWordLists::new(t.iter().map(|w| w.iter().map(|s| s.to_string()).collect()).collect()).unwrap()
    }

    #[test]
    fn perfect_association_and_independence() {
        // a and b appear together in 2 of 3 contexts and never apart
        let c = corpus(&["a", "b", "c"], &[&[0, 1], &[0, 1, 2], &[2]]);
        let s = npmi_score(&lists(&[&["a", "b"]]), &c, &WindowStrategy::Document).unwrap();
        assert_eq!(s.per_topic, vec![1.0]);
        // p(a) = p(b) = 1/2, p(a, b) = 1/4
        let c = corpus(&["a", "b", "x"], &[&[0, 1], &[0, 2], &[1, 2], &[2]]);
        let s = npmi_score(&lists(&[&["a", "b"]]), &c, &WindowStrategy::Document).unwrap();
        assert!(s.per_topic[0].abs() < 1e-10);
    }

    #[test]
    fn zero_joint_scores_minus_one() {
        let c = corpus(&["a", "b"], &[&[0], &[1]]);
        let s = npmi_score(&lists(&[&["a", "b"]]), &c, &WindowStrategy::Document).unwrap();
        assert_eq!(s.per_topic, vec![-1.0]);
    }

    #[test]
    fn unknown_term_errors() {
        let c = corpus(&["a", "b"], &[&[0, 1]]);
        assert!(npmi_score(&lists(&[&["a", "q"]]), &c, &WindowStrategy::Document).is_err());
    }

    #[test]
    fn cv_disjoint_words_score_zero() {
        // a and c never share a window and their context vectors share no term
        let c = corpus(&["a", "b", "c", "d"], &[&[0, 1], &[2, 3]]);
        let s = cv_score(&lists(&[&["a", "c"]]), &c, 2).unwrap();
        assert_eq!(s.per_topic, vec![0.0]);
    }

    #[test]
    fn cv_single_pair_by_hand() {
        // five documents, each shorter than the window, so each is one context
        let c = corpus(&["a", "b", "c"], &[&[0, 1], &[0, 1, 2], &[0], &[1, 2], &[2]]);
        let s = cv_score(&lists(&[&["a", "b"]]), &c, 110).unwrap();
        // df: a 3, b 3, c 3; joint ab 2, ac 1, bc 2; C = 5
        let n = |j: f64, di: f64, dj: f64| {
            let p = j / 5.0 + NPMI_EPS;
            ((p / (di / 5.0 * dj / 5.0)).ln() / -p.ln()).clamp(-1.0, 1.0)
        };
        let va = [n(3.0, 3.0, 3.0), n(2.0, 3.0, 3.0), n(1.0, 3.0, 3.0)];
        let vb = [n(2.0, 3.0, 3.0), n(3.0, 3.0, 3.0), n(2.0, 3.0, 3.0)];
        let cos = cosine(&va, &vb);
        let expect = n(2.0, 3.0, 3.0) * cos;
        assert!((s.per_topic[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn cv_invariant_under_corpus_duplication() {
        let docs: &[&[usize]] = &[&[0, 1, 2, 3, 1, 0], &[2, 3, 4, 4, 1], &[0, 4, 2], &[3, 3, 1, 0, 2]];
        let twice: Vec<&[usize]> = docs.iter().chain(docs.iter()).copied().collect();
        let terms = ["a", "b", "c", "d", "e"];
        let l = lists(&[&["a", "b", "c"], &["d", "e", "a"]]);
        let once = cv_score(&l, &corpus(&terms, docs), 3).unwrap();
        let double = cv_score(&l, &corpus(&terms, &twice), 3).unwrap();
        for (x, y) in once.per_topic.iter().zip(&double.per_topic) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    // brute-force oracle: enumerate windows explicitly as sets
    fn windows(docs: &[Vec<u32>], w: Option<usize>) -> Vec<BTreeSet<u32>> {
        let mut out = Vec::new();
        for d in docs {
            match w {
                Some(w) if d.len() > w => {
                    for s in 0..=(d.len() - w) {
                        out.push(d[s..s + w].iter().copied().collect());
                    }
                }
                _ => out.push(d.iter().copied().collect()),
            }
        }
        out
    }

    fn oracle_npmi(ctx: &[BTreeSet<u32>], i: u32, j: u32) -> f64 {
        let c = ctx.len() as u64;
        let df = |x: u32| ctx.iter().filter(|s| s.contains(&x)).count() as u64;
        let joint = ctx.iter().filter(|s| s.contains(&i) && s.contains(&j)).count() as u64;
        npmi(joint, df(i), df(j), c)
    }

    proptest! {
        #[test]
        fn matches_enumeration_oracle(
            docs in prop::collection::vec(prop::collection::vec(0u32..6, 1..7), 1..=8),
            w in 2usize..5,
        ) {
            let used: BTreeSet<u32> = docs.iter().flatten().copied().collect();
            prop_assume!(used.len() >= 3);
            let terms: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
            let c = Corpus::new(Vocabulary::new(terms.clone()).unwrap(), docs.clone(), vec![]).unwrap();
            let kept: Vec<String> = c.vocab().terms().to_vec();
            let topic: Vec<String> = kept.iter().take(3).cloned().collect();
            let l = TopicWordLists::new(vec![topic.clone()]).unwrap();
            let ids: Vec<u32> = topic.iter().map(|t| c.vocab().id(t).unwrap() as u32).collect();

            let ctx = windows(c.docs(), None);
            let expect = [(0, 1), (0, 2), (1, 2)].iter().map(|&(a, b)| oracle_npmi(&ctx, ids[a], ids[b])).sum::<f64>() / 3.0;
            let got = npmi_score(&l, &c, &WindowStrategy::Document).unwrap();
            prop_assert!((got.per_topic[0] - expect).abs() < 1e-12);

            let ctx = windows(c.docs(), Some(w));
            let v = c.num_terms() as u32;
            let vec_of = |i: u32| -> Vec<f64> {
                (0..v).map(|j| {
                    let joint = ctx.iter().filter(|s| s.contains(&i) && s.contains(&j)).count();
                    if joint == 0 { 0.0 } else { oracle_npmi(&ctx, i, j) }
                }).collect()
            };
            let expect = [(0, 1), (0, 2), (1, 2)].iter().map(|&(a, b)| {
                oracle_npmi(&ctx, ids[a], ids[b]) * cosine(&vec_of(ids[a]), &vec_of(ids[b]))
            }).sum::<f64>() / 3.0;
            let got = cv_score(&l, &c, w).unwrap();
            prop_assert!((got.per_topic[0] - expect).abs() < 1e-12);
        }

        #[test]
        fn npmi_in_range(df_i in 1u64..50, df_j in 1u64..50, extra in 0u64..50, joint_frac in 0.0f64..=1.0) {
            let joint = (joint_frac * df_i.min(df_j) as f64).floor() as u64;
            let contexts = df_i.max(df_j) + extra;
            let v = npmi(joint, df_i, df_j, contexts);
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }
}
