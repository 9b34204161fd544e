//! Building a negation-focused corpus from raw documents: segment into
//! sentences, keep sentences with at least one negating cue, then sample the
//! two sources equally.

use std::cmp::Ordering;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CueRecord, SentenceRecord, TokenRecord};
use crate::lexicon::{match_cues, CueLexicon, CueMatch};
use crate::rng;
use crate::text::{tokenize, TokenSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    A,
    B,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::A => "a",
            Source::B => "b",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub source: Source,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("source {side} has {available} negation sentence(s) but {needed} were requested from it")]
    Capacity { side: Source, needed: usize, available: usize },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

/// Sentence splitter interface.
pub trait SentenceSegmenter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<String>;
}

/// Splits after `.`, `?` or `!` when followed by whitespace and an uppercase
/// letter or digit, unless the word before the period is a known abbreviation.
/// A blank line always ends a sentence.
#[derive(Clone, Debug)]
pub struct RuleSegmenter {
    abbreviations: Vec<String>,
}

pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "vs.", "e.g.", "i.e.", "cf.", "fig.", "figs.", "al.", "approx.",
    "ref.", "vol.", "pp.", "jr.", "sr.", "inc.", "ltd.", "co.", "no.",
];

impl Default for RuleSegmenter {
    fn default() -> Self {
        RuleSegmenter { abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect() }
    }
}

const CLOSERS: &[char] = &['"', '\'', ')', ']'];

impl RuleSegmenter {
    pub fn with_abbreviations<I: IntoIterator<Item = S>, S: Into<String>>(abbreviations: I) -> Self {
        RuleSegmenter { abbreviations: abbreviations.into_iter().map(|s| s.into().to_lowercase()).collect() }
    }

    fn is_abbreviation(&self, chars: &[char], period: usize) -> bool {
        let mut start = period;
        while start > 0 && !chars[start - 1].is_whitespace() {
            start -= 1;
        }
        let word: String = chars[start..=period]
            .iter()
            .skip_while(|c| matches!(c, '(' | '[' | '"' | '\''))
            .flat_map(|c| c.to_lowercase())
            .collect();
        if self.abbreviations.contains(&word) {
            return true;
        }
        // initials such as "J."
        let mut it = word.chars();
        matches!((it.next(), it.next(), it.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
    }

    fn segment_paragraph(&self, chars: &[char], out: &mut Vec<String>) {
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            if !matches!(chars[i], '.' | '?' | '!') {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j], '.' | '?' | '!') || CLOSERS.contains(&chars[j])) {
                j += 1;
            }
            if j >= chars.len() || !chars[j].is_whitespace() {
                i = j;
                continue;
            }
            let mut k = j;
            while k < chars.len() && chars[k].is_whitespace() {
                k += 1;
            }
            let opens_sentence = k < chars.len() && (chars[k].is_uppercase() || chars[k].is_ascii_digit());
            if opens_sentence && !(chars[i] == '.' && self.is_abbreviation(chars, i)) {
                push_trimmed(&chars[start..j], out);
                start = k;
            }
            i = k;
        }
        push_trimmed(&chars[start..], out);
    }
}

fn push_trimmed(chars: &[char], out: &mut Vec<String>) {
    let s: String = chars.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

impl SentenceSegmenter for RuleSegmenter {
    fn segment(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut para: Vec<char> = Vec::new();
        for line in text.split('\n') {
            if line.trim().is_empty() {
                self.segment_paragraph(&para, &mut out);
                para.clear();
            } else {
                if !para.is_empty() {
                    para.push('\n');
                }
                para.extend(line.trim_end_matches('\r').chars());
            }
        }
        self.segment_paragraph(&para, &mut out);
        out
    }
}

/// Sentences of `doc` with 0-based ids in document order.
pub fn segment_sentences(doc: &RawDocument) -> Vec<(u64, String)> {
    segment_with(&RuleSegmenter::default(), doc)
}

pub fn segment_with(segmenter: &dyn SentenceSegmenter, doc: &RawDocument) -> Vec<(u64, String)> {
    segmenter.segment(&doc.text).into_iter().enumerate().map(|(i, s)| (i as u64, s)).collect()
}

/// A segmented sentence awaiting filtering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSentence {
    pub source: Source,
    pub doc_id: String,
    pub sent_id: u64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegationSentence {
    pub source: Source,
    pub doc_id: String,
    pub sent_id: u64,
    pub tokens: TokenSequence,
    /// All matches, PSEUDO included.
    pub matches: Vec<CueMatch>,
}

impl NegationSentence {
    fn order_key(&self) -> (Source, &str, u64) {
        (self.source, &self.doc_id, self.sent_id)
    }

    pub fn negating(&self) -> impl Iterator<Item = &CueMatch> {
        self.matches.iter().filter(|m| m.is_negating())
    }

    /// Canonical corpus record: negating cues filled in, no scopes.
    pub fn to_record(&self, corpus: &str) -> SentenceRecord {
        SentenceRecord {
            doc_id: self.doc_id.clone(),
            sent_id: self.sent_id,
            corpus: corpus.to_string(),
            source: Some(self.source.as_str().to_string()),
            text: self.tokens.text().to_string(),
            tokens: self.tokens.tokens().iter().map(|t| TokenRecord { s: t.start, e: t.end }).collect(),
            cues: self
                .negating()
                .map(|m| CueRecord {
                    kind: m.kind,
                    toks: m.token_indices.clone(),
                    span: [m.char_span.0, m.char_span.1],
                })
                .collect(),
            scopes: Vec::new(),
        }
    }
}

fn compare(a: &NegationSentence, b: &NegationSentence) -> Ordering {
    a.order_key().cmp(&b.order_key())
}

/// Sentences that carry at least one non-PSEUDO cue, kept in (source, doc_id, sent_id) order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NegationCorpus {
    pub sentences: Vec<NegationSentence>,
}

impl NegationCorpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn count(&self, source: Source) -> usize {
        self.sentences.iter().filter(|s| s.source == source).count()
    }

    pub fn of_source(&self, source: Source) -> NegationCorpus {
        NegationCorpus { sentences: self.sentences.iter().filter(|s| s.source == source).cloned().collect() }
    }

    pub fn to_records(&self, corpus: &str) -> Vec<SentenceRecord> {
        self.sentences.iter().map(|s| s.to_record(corpus)).collect()
    }
}

/// Keeps exactly the sentences with at least one negating match.
pub fn filter_negation(sentences: &[CandidateSentence], lex: &CueLexicon) -> NegationCorpus {
    let mut kept: Vec<NegationSentence> = sentences
        .par_iter()
        .filter_map(|c| {
            let tokens = tokenize(&c.text);
            let matches = match_cues(&tokens, lex);
            matches.iter().any(CueMatch::is_negating).then(|| NegationSentence {
                source: c.source,
                doc_id: c.doc_id.clone(),
                sent_id: c.sent_id,
                tokens,
                matches,
            })
        })
        .collect();
    kept.sort_by(compare);
    NegationCorpus { sentences: kept }
}

/// Segments every document (in parallel) and filters the result.
pub fn extract_documents(docs: &[RawDocument], lex: &CueLexicon, segmenter: &dyn SentenceSegmenter) -> NegationCorpus {
    let candidates: Vec<CandidateSentence> = docs
        .par_iter()
        .flat_map_iter(|d| {
            segment_with(segmenter, d).into_iter().map(move |(sent_id, text)| CandidateSentence {
                source: d.source,
                doc_id: d.doc_id.clone(),
                sent_id,
                text,
            })
        })
        .collect();
    filter_negation(&candidates, lex)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalancedSample {
    pub corpus: NegationCorpus,
    /// Set when a non-strict request had to be reduced.
    pub clamped_to: Option<usize>,
}

/// Draws `ceil(n_total/2)` sentences from `a` and `floor(n_total/2)` from `b`
/// without replacement.
///
/// In strict mode a source that cannot supply its share is an error; otherwise
/// `n_total` is reduced to the largest request both sources can meet.
pub fn balanced_sample(
    a: &NegationCorpus,
    b: &NegationCorpus,
    n_total: usize,
    seed: u64,
    strict: bool,
) -> Result<BalancedSample, ExtractError> {
    let (na, nb) = (a.len(), b.len());
    let mut n = n_total;
    let mut clamped_to = None;
    let want_a = n.div_ceil(2);
    let want_b = n / 2;
    if want_a > na || want_b > nb {
        if strict {
            let (source, needed, available) =
                if want_a > na { (Source::A, want_a, na) } else { (Source::B, want_b, nb) };
            return Err(ExtractError::Capacity { side: source, needed, available });
        }
        n = 2 * na.min(nb) + usize::from(na > nb);
        clamped_to = Some(n);
    }

    let mut picked = draw(a, n.div_ceil(2), seed, Source::A);
    picked.extend(draw(b, n / 2, seed, Source::B));
    picked.sort_by(compare);
    Ok(BalancedSample { corpus: NegationCorpus { sentences: picked }, clamped_to })
}

fn draw(corpus: &NegationCorpus, k: usize, seed: u64, key: Source) -> Vec<NegationSentence> {
    let mut pool: Vec<&NegationSentence> = corpus.sentences.iter().collect();
    pool.sort_by(|x, y| compare(x, y));
    let mut rng = rng::stream(seed, &["balanced_sample".into(), key.as_str().into()]);
    let mut idx = index::sample(&mut rng, pool.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

/// Reads `dir/a/*` and `dir/b/*` (one UTF-8 document per file, sorted by name).
pub fn load_documents(dir: &Path) -> Result<Vec<RawDocument>, ExtractError> {
    let mut docs = Vec::new();
    let mut found_any = false;
    for source in [Source::A, Source::B] {
        let sub = dir.join(source.as_str());
        if !sub.is_dir() {
            continue;
        }
        found_any = true;
        let err =
            |path: &Path, e: std::io::Error| ExtractError::Input { path: path.to_path_buf(), message: e.to_string() };
        let mut files: Vec<PathBuf> = std::fs::read_dir(&sub)
            .map_err(|e| err(&sub, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for path in files {
            let text = std::fs::read_to_string(&path).map_err(|e| err(&path, e))?;
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            docs.push(RawDocument { doc_id: format!("{}/{}", source, name), source, text });
        }
    }
    if !found_any {
        return Err(ExtractError::Input {
            path: dir.to_path_buf(),
            message: "expected subdirectories `a/` and/or `b/` holding one document per file".into(),
        });
    }
    Ok(docs)
}
