use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::TopicModel;

/// Knobs for intruder construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidConfig {
    /// Words shown from the target topic.
    pub n: usize,
    /// A candidate is ineligible when it ranks inside this top fraction of the
    /// target topic's vocabulary by probability.
    pub exclude_top_fraction: f64,
    pub seed: u64,
}

impl WidConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        WidConfig {
            n,
            exclude_top_fraction: 0.5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WidInstance {
    pub topic_id: usize,
    /// The topic's top-n words plus the intruder, shuffled.
    pub displayed_words: Vec<String>,
    /// 0-based position of the intruder in `displayed_words`.
    pub intruder_index: usize,
    pub seed: u64,
}

/// One intrusion instance per topic. The intruder is drawn uniformly from
/// the other topics' top-n words that are neither in the target's top-n nor
/// ranked in the target's top `exclude_top_fraction` of the vocabulary.
/// Topics with no eligible candidate are skipped with a warning.
pub fn build_wid_instances(model: &TopicModel, cfg: &WidConfig) -> Result<Vec<WidInstance>> {
    let k = model.num_topics();
    if k < 2 {
        return Err(Error::Config(format!(
            "word intrusion needs at least 2 topics, got {k}"
        )));
    }
    if cfg.n == 0 {
        return Err(Error::Config("word intrusion list size must be positive".into()));
    }
    let v = model.phi.ncols();
    let cutoff = (cfg.exclude_top_fraction * v as f64).ceil() as usize;
    let ranking = model.top_words(v);
    let top: Vec<&[usize]> = ranking.iter().map(|r| &r[..cfg.n.min(v)]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(k);
    for t in 0..k {
        let banned: BTreeSet<usize> = ranking[t][..cutoff.max(top[t].len()).min(v)].iter().copied().collect();
        let pool: Vec<usize> = (0..k)
            .filter(|&o| o != t)
            .flat_map(|o| top[o].iter().copied())
            .filter(|w| !banned.contains(w))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if pool.is_empty() {
            log::warn!("topic {t}: no eligible intruder, skipping");
            continue;
        }
        let intruder = pool[rng.random_range(0..pool.len())];
        let mut words: Vec<usize> = top[t].to_vec();
        words.push(intruder);
        words.shuffle(&mut rng);
        let intruder_index = words
            .iter()
            .position(|&w| w == intruder)
            .expect("intruder is displayed");
        out.push(WidInstance {
            topic_id: t,
            displayed_words: words.iter().map(|&w| model.terms[w].clone()).collect(),
            intruder_index,
            seed: cfg.seed,
        });
    }
    if out.is_empty() {
        log::warn!("no word intrusion instances could be built");
    }
    Ok(out)
}

/// Instruction text with a 1-based numbered word list; the expected reply is
/// the number of the intruder.
pub fn render_prompt(words: &[String]) -> String {
    let mut s = String::from(
        "One word in the list below does not belong with the others.\n\
         Reply with the number of that word only.\n\n",
    );
    for (i, w) in words.iter().enumerate() {
        s.push_str(&format!("{}. {w}\n", i + 1));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeRequest {
    pub id: usize,
    pub words: Vec<String>,
    pub prompt: String,
}

/// Something that picks the intruder. Answers are 0-based positions; `None`
/// means no usable answer (timeout, malformed reply, out of range).
pub trait Judge {
    fn judge(&mut self, request: &JudgeRequest) -> Option<usize>;

    fn judge_all(&mut self, requests: &[JudgeRequest]) -> Vec<Option<usize>> {
        requests.iter().map(|r| self.judge(r)).collect()
    }
}

/// Replies from a fixed table indexed by request id.
pub struct ScriptedJudge {
    answers: Vec<Option<usize>>,
}

impl ScriptedJudge {
    pub fn new(answers: Vec<Option<usize>>) -> Self {
        ScriptedJudge { answers }
    }

    /// Always right.
    pub fn oracle(instances: &[WidInstance]) -> Self {
        ScriptedJudge::new(instances.iter().map(|i| Some(i.intruder_index)).collect())
    }
}

impl Judge for ScriptedJudge {
    fn judge(&mut self, request: &JudgeRequest) -> Option<usize> {
        self.answers.get(request.id).copied().flatten()
    }
}

/// Uniform guesses from a seeded stream.
pub struct RandomJudge {
    rng: ChaCha8Rng,
}

impl RandomJudge {
    pub fn new(seed: u64) -> Self {
        RandomJudge {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Judge for RandomJudge {
    fn judge(&mut self, request: &JudgeRequest) -> Option<usize> {
        Some(self.rng.random_range(0..request.words.len()))
    }
}

/// Picks the word with the lowest mean cosine similarity to the rest of the
/// list. Words without a vector have similarity 0 to everything.
pub struct EmbeddingJudge {
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingJudge {
    pub fn new(vectors: HashMap<String, Vec<f64>>) -> Self {
        EmbeddingJudge { vectors }
    }

    /// `term v1 v2 …` per line.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let mut f = line.split_whitespace();
            let Some(term) = f.next() else { continue };
            let v = f
                .map(|x| x.parse::<f64>().map_err(|e| Error::parse(path, i + 1, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            vectors.insert(term.to_string(), v);
        }
        Ok(EmbeddingJudge { vectors })
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        match (self.vectors.get(a), self.vectors.get(b)) {
            (Some(x), Some(y)) if x.len() == y.len() => {
                let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                let n = x.iter().map(|p| p * p).sum::<f64>().sqrt() * y.iter().map(|q| q * q).sum::<f64>().sqrt();
                if n > 0.0 {
                    dot / n
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

impl Judge for EmbeddingJudge {
    fn judge(&mut self, request: &JudgeRequest) -> Option<usize> {
        let w = &request.words;
        (0..w.len())
            .map(|i| {
                let s: f64 = (0..w.len())
                    .filter(|&j| j != i)
                    .map(|j| self.similarity(&w[i], &w[j]))
                    .sum();
                (i, s)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }
}

/// External judge process. Each request is written to its stdin as one JSON
/// line `{"id":…,"words":[…],"prompt":"…"}`; it answers with lines
/// `id<TAB>index`, index 1-based, in any order. At most `max_in_flight`
/// requests are outstanding, and a request unanswered for `timeout` fails.
pub struct SubprocessJudge {
    child: Child,
    stdin: Option<ChildStdin>,
    replies: Receiver<String>,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl SubprocessJudge {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Config(format!("cannot start judge `{program}`: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(SubprocessJudge {
            child,
            stdin,
            replies: rx,
            max_in_flight: 8,
            timeout: Duration::from_secs(60),
        })
    }

    fn send(&mut self, request: &JudgeRequest) -> bool {
        let Some(stdin) = self.stdin.as_mut() else {
            return false;
        };
        let line = serde_json::to_string(request).expect("request serializes");
        writeln!(stdin, "{line}").and_then(|_| stdin.flush()).is_ok()
    }
}

fn parse_reply(line: &str) -> Option<(usize, usize)> {
    let (id, index) = line.trim().split_once('\t')?;
    Some((id.trim().parse().ok()?, index.trim().parse().ok()?))
}

impl Judge for SubprocessJudge {
    fn judge(&mut self, request: &JudgeRequest) -> Option<usize> {
        self.judge_all(std::slice::from_ref(request))[0]
    }

    fn judge_all(&mut self, requests: &[JudgeRequest]) -> Vec<Option<usize>> {
        let mut answers = vec![None; requests.len()];
        let slot: HashMap<usize, usize> = requests.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        let mut pending: VecDeque<usize> = (0..requests.len()).collect();
        let mut in_flight = BTreeSet::new();
        loop {
            while in_flight.len() < self.max_in_flight.max(1) {
                let Some(i) = pending.pop_front() else { break };
                if self.send(&requests[i]) {
                    in_flight.insert(i);
                } else {
                    log::warn!("judge: could not send request {}", requests[i].id);
                }
            }
            if in_flight.is_empty() {
                break;
            }
            match self.replies.recv_timeout(self.timeout) {
                Ok(line) => match parse_reply(&line).and_then(|(id, idx)| slot.get(&id).map(|&s| (s, idx))) {
                    Some((s, idx)) if in_flight.remove(&s) => {
                        let n = requests[s].words.len();
                        answers[s] = (1..=n).contains(&idx).then(|| idx - 1);
                        if answers[s].is_none() {
                            log::warn!("judge: index {idx} out of range for request {}", requests[s].id);
                        }
                    }
                    _ => log::warn!("judge: ignoring reply `{line}`"),
                },
                Err(RecvTimeoutError::Timeout) => {
                    log::warn!("judge: timed out with {} request(s) outstanding", in_flight.len());
                    in_flight.clear();
                }
                Err(RecvTimeoutError::Disconnected) => {
                    log::warn!("judge: process closed its output");
                    break;
                }
            }
        }
        answers
    }
}

impl Drop for SubprocessJudge {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

/// What to do with instances the judge failed to answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailurePolicy {
    Incorrect,
    Excluded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidResult {
    /// `correct / counted`.
    pub accuracy: f64,
    pub correct: usize,
    pub counted: usize,
    pub failed: usize,
}

pub fn wid_accuracy(instances: &[WidInstance], judge: &mut dyn Judge, policy: FailurePolicy) -> Result<WidResult> {
    if instances.is_empty() {
        return Err(Error::Data("no word intrusion instances to judge".into()));
    }
    let requests: Vec<JudgeRequest> = instances
        .iter()
        .enumerate()
        .map(|(id, inst)| JudgeRequest {
            id,
            words: inst.displayed_words.clone(),
            prompt: render_prompt(&inst.displayed_words),
        })
        .collect();
    let answers = judge.judge_all(&requests);
    let mut correct = 0;
    let mut failed = 0;
    for (inst, answer) in instances.iter().zip(&answers) {
        match answer {
            Some(a) if *a == inst.intruder_index => correct += 1,
            Some(_) => {}
            None => {
                log::warn!("topic {}: judge gave no usable answer", inst.topic_id);
                failed += 1;
            }
        }
    }
    let counted = match policy {
        FailurePolicy::Incorrect => instances.len(),
        FailurePolicy::Excluded => instances.len() - failed,
    };
    if counted == 0 {
        return Err(Error::Data("every judge request failed".into()));
    }
    Ok(WidResult {
        accuracy: correct as f64 / counted as f64,
        correct,
        counted,
        failed,
    })
}
