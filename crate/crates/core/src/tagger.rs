//! Structured perceptron sequence tagger with first-order transitions,
//! weight averaging and exact Viterbi decoding.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::labelcodec::{Task, CUE_LEFT, CUE_RIGHT};
use crate::lexicon::CueLexicon;
use crate::rng;
use crate::text::{fold, TokenSequence};

pub const MODEL_FORMAT: &str = "negkit-tagger/1";

const BOS: &str = "BOS";
const EOS: &str = "EOS";

#[derive(Debug, thiserror::Error)]
pub enum TaggerError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("position {index} out of range for {len} token(s)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("instance {instance}: label {label} outside the {n_labels}-label scheme")]
    LabelOutOfRange { instance: usize, label: u8, n_labels: usize },
    #[error("instance {instance}: {labels} label(s) for {tokens} token(s)")]
    LengthMismatch { instance: usize, tokens: usize, labels: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sorted, deduplicated feature names for one position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureVector(pub Vec<String>);

impl FeatureVector {
    pub fn contains(&self, name: &str) -> bool {
        self.0.binary_search_by(|f| f.as_str().cmp(name)).is_ok()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }
}

fn is_marker(s: &str) -> bool {
    s == CUE_LEFT || s == CUE_RIGHT
}

fn is_punct(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace())
}

fn affix(word: &str, n: usize, prefix: bool) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= n {
        return word.to_string();
    }
    let part = if prefix { &chars[..n] } else { &chars[chars.len() - n..] };
    part.iter().collect()
}

/// Where a position sits relative to the marked cue, if any.
fn cue_relation(words: &[&str], i: usize) -> Option<String> {
    let lefts: Vec<usize> = (0..words.len()).filter(|&k| words[k] == CUE_LEFT).collect();
    if lefts.is_empty() {
        return None;
    }
    let rights: Vec<usize> = (0..words.len()).filter(|&k| words[k] == CUE_RIGHT).collect();
    let inside = lefts.iter().zip(&rights).any(|(&l, &r)| l < i && i < r);
    if inside {
        return Some("cue=in".into());
    }
    // nearest marker boundary and whether punctuation separates us from it
    let (dir, from, to) = match (lefts.iter().find(|&&l| l > i), rights.iter().rev().find(|&&r| r < i)) {
        (Some(&l), Some(&r)) if l - i <= i - r => ("left", i, l),
        (Some(&l), None) => ("left", i, l),
        (_, Some(&r)) => ("right", r, i),
        (None, None) => return None,
    };
    let dist = to - from;
    let blocked = words[from + 1..to].iter().any(|w| is_punct(w));
    let bucket = if dist >= 4 { "4+".to_string() } else { dist.to_string() };
    Some(format!("cue={dir}|punct={}|d={bucket}", u8::from(blocked)))
}

/// Feature names for position `i`.
pub fn featurize(tokens: &TokenSequence, i: usize, lexicon: Option<&CueLexicon>) -> Result<FeatureVector, TaggerError> {
    let words: Vec<&str> = tokens.surfaces().collect();
    if i >= words.len() {
        return Err(TaggerError::IndexOutOfRange { index: i, len: words.len() });
    }
    Ok(featurize_words(&words, i, lexicon))
}

fn featurize_words(words: &[&str], i: usize, lexicon: Option<&CueLexicon>) -> FeatureVector {
    let at = |k: isize| -> String {
        let j = i as isize + k;
        if j < 0 {
            BOS.to_string()
        } else if j as usize >= words.len() {
            EOS.to_string()
        } else {
            fold(words[j as usize])
        }
    };
    let w = words[i];
    let lw = fold(w);
    let mut f = BTreeSet::new();
    f.insert("bias".to_string());
    f.insert(format!("w0={lw}"));
    for k in [-2isize, -1, 1, 2] {
        f.insert(format!("w{k:+}={}", at(k)));
    }
    f.insert(format!("w-1,w0={}|{lw}", at(-1)));
    f.insert(format!("w0,w+1={lw}|{}", at(1)));
    f.insert(format!("p3={}", affix(&lw, 3, true)));
    f.insert(format!("s3={}", affix(&lw, 3, false)));
    if is_marker(w) {
        f.insert("marker".into());
    } else {
        if is_punct(w) {
            f.insert("punct".into());
        }
        if w.chars().all(|c| c.is_ascii_digit()) {
            f.insert("digit".into());
        }
        if w.chars().next().is_some_and(char::is_uppercase) {
            f.insert("cap".into());
        }
        if let Some(lex) = lexicon {
            for cat in lex.token_categories(w) {
                f.insert(format!("lex:{cat}"));
            }
        }
    }
    for k in [-2isize, -1, 1, 2] {
        let j = i as isize + k;
        if j >= 0 && (j as usize) < words.len() && is_marker(words[j as usize]) {
            let side = if words[j as usize] == CUE_LEFT { "L" } else { "R" };
            f.insert(format!("mark{k:+}={side}"));
        }
    }
    if let Some(rel) = cue_relation(words, i) {
        f.insert(format!("{rel}|punct_tok={}", u8::from(is_punct(w))));
        f.insert(rel);
    }
    FeatureVector(f.into_iter().collect())
}

/// Exact Viterbi over `emissions[t][y]` and a `(n_labels + 1) x n_labels`
/// transition table whose first row scores the start. Ties go to the lowest label id.
pub fn viterbi(emissions: &[Vec<f64>], transitions: &[f64], n_labels: usize) -> Vec<usize> {
    let n = emissions.len();
    if n == 0 {
        return Vec::new();
    }
    let trans = |prev: Option<usize>, y: usize| transitions[prev.map_or(0, |p| p + 1) * n_labels + y];
    let mut score: Vec<f64> = (0..n_labels).map(|y| trans(None, y) + emissions[0][y]).collect();
    let mut back = vec![vec![0usize; n_labels]; n];
    for t in 1..n {
        let mut next = vec![f64::NEG_INFINITY; n_labels];
        for y in 0..n_labels {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (p, s) in score.iter().enumerate() {
                let v = s + trans(Some(p), y);
                if v > best {
                    best = v;
                    arg = p;
                }
            }
            next[y] = best + emissions[t][y];
            back[t][y] = arg;
        }
        score = next;
    }
    let mut last = 0;
    for y in 1..n_labels {
        if score[y] > score[last] {
            last = y;
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    path
}

/// A labeled sequence for training.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSequence {
    pub tokens: TokenSequence,
    pub labels: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    /// Enables `lex:*` features.
    pub lexicon: Option<CueLexicon>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 5, seed: 0, lexicon: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs: usize,
    pub seed: u64,
    pub instances: usize,
}

/// Averaged perceptron weights for one task.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaggerModel {
    pub format: String,
    pub task: Task,
    pub n_labels: usize,
    pub features: Vec<String>,
    /// Row-major `features.len() x n_labels`.
    pub weights: Vec<f64>,
    /// Row-major `(n_labels + 1) x n_labels`; row 0 scores the sequence start.
    pub transitions: Vec<f64>,
    /// Lexicon TSV backing the `lex:*` features.
    pub lexicon: Option<String>,
    pub meta: TrainMeta,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    lex: Option<CueLexicon>,
}

impl PartialEq for TaggerModel {
    fn eq(&self, other: &Self) -> bool {
        self.format == other.format
            && self.task == other.task
            && self.n_labels == other.n_labels
            && self.features == other.features
            && self.weights == other.weights
            && self.transitions == other.transitions
            && self.lexicon == other.lexicon
            && self.meta == other.meta
    }
}

impl TaggerModel {
    fn finish(mut self) -> Result<Self, TaggerError> {
        self.index = self.features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        self.lex = match &self.lexicon {
            Some(tsv) => Some(CueLexicon::load_str(tsv).map_err(|e| TaggerError::Format(e.to_string()))?),
            None => None,
        };
        Ok(self)
    }

    pub fn lexicon(&self) -> Option<&CueLexicon> {
        self.lex.as_ref()
    }

    pub fn feature_ids(&self, tokens: &TokenSequence) -> Vec<Vec<usize>> {
        let words: Vec<&str> = tokens.surfaces().collect();
        (0..words.len())
            .map(|i| {
                featurize_words(&words, i, self.lex.as_ref())
                    .0
                    .iter()
                    .filter_map(|f| self.index.get(f).copied())
                    .collect()
            })
            .collect()
    }

    fn emissions(&self, feats: &[Vec<usize>]) -> Vec<Vec<f64>> {
        emissions(&self.weights, self.n_labels, feats)
    }

    /// Highest-scoring label sequence.
    pub fn predict(&self, tokens: &TokenSequence) -> Vec<u8> {
        let feats = self.feature_ids(tokens);
        viterbi(&self.emissions(&feats), &self.transitions, self.n_labels).into_iter().map(|y| y as u8).collect()
    }

    /// Weight of `(feature, label)`; zero for unknown features.
    pub fn weight(&self, feature: &str, label: usize) -> f64 {
        self.index.get(feature).map_or(0.0, |&f| self.weights[f * self.n_labels + label])
    }

    pub fn scaled(&self, factor: f64) -> TaggerModel {
        let mut m = self.clone();
        m.weights.iter_mut().for_each(|w| *w *= factor);
        m.transitions.iter_mut().for_each(|w| *w *= factor);
        m
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TaggerError> {
        serde_json::to_writer(&mut w, self).map_err(|e| TaggerError::Format(e.to_string()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models always serialize")
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, TaggerError> {
        let m: TaggerModel = serde_json::from_reader(r).map_err(|e| TaggerError::Format(e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(TaggerError::Format(format!("unsupported format {:?}, expected {MODEL_FORMAT:?}", m.format)));
        }
        if m.n_labels != m.task.n_labels()
            || m.weights.len() != m.features.len() * m.n_labels
            || m.transitions.len() != (m.n_labels + 1) * m.n_labels
        {
            return Err(TaggerError::Format("weight table dimensions do not match the label set".into()));
        }
        if m.weights.iter().chain(&m.transitions).any(|w| !w.is_finite()) {
            return Err(TaggerError::Format("non-finite weight".into()));
        }
        m.finish()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, TaggerError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), TaggerError> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }
}

fn emissions(weights: &[f64], n_labels: usize, feats: &[Vec<usize>]) -> Vec<Vec<f64>> {
    feats
        .iter()
        .map(|fs| {
            let mut e = vec![0.0; n_labels];
            for &f in fs {
                for (y, slot) in e.iter_mut().enumerate() {
                    *slot += weights[f * n_labels + y];
                }
            }
            e
        })
        .collect()
}

/// Running weights plus the accumulators needed for averaging.
struct Averaged {
    current: Vec<f64>,
    // sum over updates of (step * delta); average = current - acc / step
    acc: Vec<f64>,
}

impl Averaged {
    fn new(n: usize) -> Self {
        Averaged { current: vec![0.0; n], acc: vec![0.0; n] }
    }

    fn add(&mut self, i: usize, delta: f64, step: f64) {
        self.current[i] += delta;
        self.acc[i] += step * delta;
    }

    fn average(&self, step: f64) -> Vec<f64> {
        self.current.iter().zip(&self.acc).map(|(w, a)| w - a / step).collect()
    }
}

/// Trains an averaged structured perceptron. Instances are visited in a
/// per-epoch order shuffled by the stream keyed on `(seed, epoch)`.
pub fn train(instances: &[LabeledSequence], task: Task, config: &TrainConfig) -> Result<TaggerModel, TaggerError> {
    if instances.is_empty() {
        return Err(TaggerError::EmptyTrainingSet);
    }
    let n_labels = task.n_labels();
    for (k, inst) in instances.iter().enumerate() {
        if inst.labels.len() != inst.tokens.len() {
            return Err(TaggerError::LengthMismatch {
                instance: k,
                tokens: inst.tokens.len(),
                labels: inst.labels.len(),
            });
        }
        if let Some(&label) = inst.labels.iter().find(|&&l| l as usize >= n_labels) {
            return Err(TaggerError::LabelOutOfRange { instance: k, label, n_labels });
        }
    }

    let lex = config.lexicon.as_ref();
    let named: Vec<Vec<FeatureVector>> = instances
        .iter()
        .map(|inst| {
            let words: Vec<&str> = inst.tokens.surfaces().collect();
            (0..words.len()).map(|i| featurize_words(&words, i, lex)).collect()
        })
        .collect();
    let features: Vec<String> =
        named.iter().flatten().flat_map(|fv| fv.0.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let index: HashMap<&str, usize> = features.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let feats: Vec<Vec<Vec<usize>>> = named
        .iter()
        .map(|sent| sent.iter().map(|fv| fv.0.iter().map(|f| index[f.as_str()]).collect()).collect())
        .collect();
    drop(named);

    let mut w = Averaged::new(features.len() * n_labels);
    let mut tr = Averaged::new((n_labels + 1) * n_labels);
    let mut step = 1.0;
    let mut order: Vec<usize> = (0..instances.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = rng::stream(config.seed, &["train".into(), epoch.into()]);
        order.shuffle(&mut rng);
        for &k in &order {
            let gold: Vec<usize> = instances[k].labels.iter().map(|&l| l as usize).collect();
            let em = emissions(&w.current, n_labels, &feats[k]);
            let pred = viterbi(&em, &tr.current, n_labels);
            if pred != gold {
                for t in 0..gold.len() {
                    if pred[t] != gold[t] {
                        for &f in &feats[k][t] {
                            w.add(f * n_labels + gold[t], 1.0, step);
                            w.add(f * n_labels + pred[t], -1.0, step);
                        }
                    }
                    let prev = |path: &[usize]| if t == 0 { 0 } else { path[t - 1] + 1 };
                    let (gp, pp) = (prev(&gold), prev(&pred));
                    if (gp, gold[t]) != (pp, pred[t]) {
                        tr.add(gp * n_labels + gold[t], 1.0, step);
                        tr.add(pp * n_labels + pred[t], -1.0, step);
                    }
                }
            }
            step += 1.0;
        }
    }

    TaggerModel {
        format: MODEL_FORMAT.to_string(),
        task,
        n_labels,
        features,
        weights: w.average(step),
        transitions: tr.average(step),
        lexicon: config.lexicon.as_ref().map(CueLexicon::to_tsv),
        meta: TrainMeta { epochs: config.epochs, seed: config.seed, instances: instances.len() },
        index: HashMap::new(),
        lex: None,
    }
    .finish()
}
