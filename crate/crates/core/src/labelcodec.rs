//! Per-token label schemes for cue detection and scope resolution.
//!
//! Cue labels: `0` affix, `1` normal cue, `2` part of a multiword cue, `3` not a cue.
//! Scope labels: `0` outside, `1` inside, one instance per gold cue. The
//! conditioning cue is marked in a copy of the sentence by wrapping its tokens
//! in [`CUE_LEFT`]/[`CUE_RIGHT`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::text::{AnnotatedSentence, CueAnnotation, CueKind, ScopeAnnotation, TokenSequence};

pub const CUE_LEFT: &str = "[CUE-L]";
pub const CUE_RIGHT: &str = "[CUE-R]";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum CueLabel {
    Affix = 0,
    Normal = 1,
    MultiwordPart = 2,
    NotCue = 3,
}

impl CueLabel {
    pub const COUNT: usize = 4;

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(CueLabel::Affix),
            1 => Some(CueLabel::Normal),
            2 => Some(CueLabel::MultiwordPart),
            3 => Some(CueLabel::NotCue),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CueLabelSeq(pub Vec<CueLabel>);

impl CueLabelSeq {
    pub fn ids(&self) -> Vec<u8> {
        self.0.iter().map(|l| l.id()).collect()
    }

    pub fn from_ids(ids: &[u8]) -> Option<Self> {
        ids.iter().map(|&i| CueLabel::from_id(i)).collect::<Option<Vec<_>>>().map(CueLabelSeq)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScopeLabelSeq {
    /// `1` inside, `0` outside, over the original (unmarked) tokens.
    pub labels: Vec<u8>,
    /// Token indices of the conditioning cue.
    pub cue_marking: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("token {token} belongs to cues {first} and {second}")]
    OverlappingCues { token: usize, first: usize, second: usize },
    #[error("cue {cue_index} does not exist ({n_cues} cue(s))")]
    NoSuchCue { cue_index: usize, n_cues: usize },
    #[error("cue {cue_index} has no scope annotation")]
    MissingScope { cue_index: usize },
    #[error("token index {index} out of range for {len} token(s)")]
    TokenOutOfRange { index: usize, len: usize },
    #[error("{labels} label(s) for {tokens} token(s)")]
    LengthMismatch { labels: usize, tokens: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeWarning {
    /// A lone `2` was decoded as a normal cue.
    LoneMultiwordPart {
        token: usize,
    },
    EmptyScope {
        cue_index: usize,
    },
    CueWithoutScope {
        cue_index: usize,
    },
}

impl fmt::Display for DecodeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeWarning::LoneMultiwordPart { token } => {
                write!(f, "token {token}: single-token multiword run decoded as a normal cue")
            }
            DecodeWarning::EmptyScope { cue_index } => write!(f, "cue {cue_index}: decoded scope is empty"),
            DecodeWarning::CueWithoutScope { cue_index } => {
                write!(f, "cue {cue_index}: no scope annotation, no scope instance generated")
            }
        }
    }
}

pub fn encode_cue(sentence: &AnnotatedSentence) -> Result<CueLabelSeq, CodecError> {
    let n = sentence.tokens.len();
    let mut labels = vec![CueLabel::NotCue; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (c, cue) in sentence.cues.iter().enumerate() {
        let label = match cue.kind {
            CueKind::Affix => CueLabel::Affix,
            CueKind::Normal => CueLabel::Normal,
            CueKind::Multiword => CueLabel::MultiwordPart,
        };
        for &t in &cue.token_indices {
            if t >= n {
                return Err(CodecError::TokenOutOfRange { index: t, len: n });
            }
            if let Some(first) = owner[t] {
                return Err(CodecError::OverlappingCues { token: t, first, second: c });
            }
            owner[t] = Some(c);
            labels[t] = label;
        }
    }
    Ok(CueLabelSeq(labels))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodedCues {
    pub cues: Vec<CueAnnotation>,
    pub warnings: Vec<DecodeWarning>,
}

/// Inverse of [`encode_cue`]. Runs of `2` become one multiword cue; every `1`
/// is a normal cue; every `0` an affix cue spanning its whole token.
pub fn decode_cue(labels: &CueLabelSeq, tokens: &TokenSequence) -> Result<DecodedCues, CodecError> {
    if labels.len() != tokens.len() {
        return Err(CodecError::LengthMismatch { labels: labels.len(), tokens: tokens.len() });
    }
    let mut out = DecodedCues::default();
    let mut i = 0;
    while i < labels.len() {
        match labels.0[i] {
            CueLabel::NotCue => i += 1,
            CueLabel::Normal => {
                out.cues.push(CueAnnotation::normal(tokens, i));
                i += 1;
            }
            CueLabel::Affix => {
                let t = &tokens.tokens()[i];
                out.cues.push(CueAnnotation::affix(i, (t.start, t.end)));
                i += 1;
            }
            CueLabel::MultiwordPart => {
                let start = i;
                while i < labels.len() && labels.0[i] == CueLabel::MultiwordPart {
                    i += 1;
                }
                if i - start == 1 {
                    out.warnings.push(DecodeWarning::LoneMultiwordPart { token: start });
                    out.cues.push(CueAnnotation::normal(tokens, start));
                } else {
                    out.cues.push(CueAnnotation::multiword(tokens, (start..i).collect()));
                }
            }
        }
    }
    Ok(out)
}

/// One scope-resolution record conditioned on a single cue.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScopeInstance {
    pub cue_index: usize,
    /// The sentence with cue markers inserted.
    pub marked: TokenSequence,
    /// Original token index of each marked token; `None` for markers.
    pub origin: Vec<Option<usize>>,
    pub labels: ScopeLabelSeq,
}

impl ScopeInstance {
    /// Labels aligned with `marked`; markers are outside.
    pub fn marked_labels(&self) -> Vec<u8> {
        self.origin.iter().map(|o| o.map_or(0, |i| self.labels.labels[i])).collect()
    }

    /// Drops marker positions from a label sequence aligned with `marked`.
    pub fn project(&self, marked_labels: &[u8]) -> Vec<u8> {
        self.origin.iter().zip(marked_labels).filter(|(o, _)| o.is_some()).map(|(_, &l)| l).collect()
    }
}

/// Wraps each contiguous run of `cue_tokens` in boundary markers.
pub fn mark_cue(tokens: &TokenSequence, cue_tokens: &[usize]) -> (TokenSequence, Vec<Option<usize>>) {
    let n = tokens.len();
    let in_cue = |i: usize| cue_tokens.contains(&i);
    let mut words: Vec<&str> = Vec::with_capacity(n + 2);
    let mut origin = Vec::with_capacity(n + 2);
    for (i, t) in tokens.tokens().iter().enumerate() {
        if in_cue(i) && (i == 0 || !in_cue(i - 1)) {
            words.push(CUE_LEFT);
            origin.push(None);
        }
        words.push(&t.surface);
        origin.push(Some(i));
        if in_cue(i) && (i + 1 == n || !in_cue(i + 1)) {
            words.push(CUE_RIGHT);
            origin.push(None);
        }
    }
    (TokenSequence::from_words(&words), origin)
}

pub fn encode_scope(sentence: &AnnotatedSentence, cue_index: usize) -> Result<ScopeInstance, CodecError> {
    let cue = sentence.cues.get(cue_index).ok_or(CodecError::NoSuchCue { cue_index, n_cues: sentence.cues.len() })?;
    let scope = sentence.scope_of(cue_index).ok_or(CodecError::MissingScope { cue_index })?;
    let n = sentence.tokens.len();
    let mut labels = vec![0u8; n];
    for &t in &scope {
        if t >= n {
            return Err(CodecError::TokenOutOfRange { index: t, len: n });
        }
        labels[t] = 1;
    }
    let (marked, origin) = mark_cue(&sentence.tokens, &cue.token_indices);
    Ok(ScopeInstance {
        cue_index,
        marked,
        origin,
        labels: ScopeLabelSeq { labels, cue_marking: cue.token_indices.clone() },
    })
}

/// Scope instances for every cue that has a scope; cues without one are skipped with a warning.
pub fn scope_instances(sentence: &AnnotatedSentence) -> Result<(Vec<ScopeInstance>, Vec<DecodeWarning>), CodecError> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for c in 0..sentence.cues.len() {
        match encode_scope(sentence, c) {
            Ok(inst) => out.push(inst),
            Err(CodecError::MissingScope { cue_index }) => warnings.push(DecodeWarning::CueWithoutScope { cue_index }),
            Err(e) => return Err(e),
        }
    }
    Ok((out, warnings))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedScope {
    pub scope: ScopeAnnotation,
    pub warning: Option<DecodeWarning>,
}

/// Inverse of [`encode_scope`]: positions labeled `1`.
pub fn decode_scope(labels: &ScopeLabelSeq, cue_index: usize) -> DecodedScope {
    let token_indices: Vec<usize> = labels.labels.iter().enumerate().filter(|(_, &l)| l == 1).map(|(i, _)| i).collect();
    let warning = token_indices.is_empty().then_some(DecodeWarning::EmptyScope { cue_index });
    DecodedScope { scope: ScopeAnnotation { cue_index, token_indices }, warning }
}

/// Which labeling problem a model or score refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cue,
    Scope,
}

impl Task {
    pub fn n_labels(self) -> usize {
        match self {
            Task::Cue => CueLabel::COUNT,
            Task::Scope => 2,
        }
    }

    /// Inside/outside collapse used for scoring.
    pub fn is_positive(self, label: u8) -> bool {
        match self {
            Task::Cue => label <= CueLabel::MultiwordPart.id(),
            Task::Scope => label == 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Cue => "cue",
            Task::Scope => "scope",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cue" => Ok(Task::Cue),
            "scope" => Ok(Task::Scope),
            _ => Err(format!("unknown task {s:?} (expected cue or scope)")),
        }
    }
}

/// A token sequence with one label per token, ready for the tagger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskInstance {
    /// Index of the source sentence in the corpus.
    pub sentence: usize,
    /// Conditioning cue for scope instances.
    pub cue_index: Option<usize>,
    /// Tagger input: the sentence itself, or its cue-marked copy.
    pub input: TokenSequence,
    /// Labels aligned with `input`.
    pub labels: Vec<u8>,
    /// For scope instances, the original index of each input token.
    pub origin: Option<Vec<Option<usize>>>,
}

impl TaskInstance {
    /// Restricts labels aligned with `input` to the original tokens.
    pub fn project(&self, labels: &[u8]) -> Vec<u8> {
        match &self.origin {
            None => labels.to_vec(),
            Some(origin) => origin.iter().zip(labels).filter(|(o, _)| o.is_some()).map(|(_, &l)| l).collect(),
        }
    }

    /// Gold labels over the original tokens.
    pub fn gold(&self) -> Vec<u8> {
        self.project(&self.labels)
    }
}

/// Builds tagger instances: one per sentence for cues, one per cue with a scope for scopes.
pub fn task_instances(sentences: &[AnnotatedSentence], task: Task) -> Result<Vec<TaskInstance>, CodecError> {
    let mut out = Vec::new();
    for (k, s) in sentences.iter().enumerate() {
        match task {
            Task::Cue => out.push(TaskInstance {
                sentence: k,
                cue_index: None,
                input: s.tokens.clone(),
                labels: encode_cue(s)?.ids(),
                origin: None,
            }),
            Task::Scope => {
                for inst in scope_instances(s)?.0 {
                    out.push(TaskInstance {
                        sentence: k,
                        cue_index: Some(inst.cue_index),
                        labels: inst.marked_labels(),
                        input: inst.marked,
                        origin: Some(inst.origin),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// CoNLL-style export: `surface<TAB>cue_label<TAB>scope_label...` per token
/// (one scope column per scope instance), followed by a blank line.
pub fn to_conll(sentence: &AnnotatedSentence) -> Result<String, CodecError> {
    let cue = encode_cue(sentence)?;
    let (instances, _) = scope_instances(sentence)?;
    let mut out = String::new();
    for (i, tok) in sentence.tokens.tokens().iter().enumerate() {
        out.push_str(&tok.surface);
        out.push('\t');
        out.push_str(&cue.0[i].id().to_string());
        for inst in &instances {
            out.push('\t');
            out.push_str(&inst.labels.labels[i].to_string());
        }
        out.push('\n');
    }
    out.push('\n');
    Ok(out)
}
