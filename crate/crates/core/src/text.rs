//! Token and annotation types, plus the rule-based word tokenizer.
//!
//! All offsets are counted in Unicode scalar values (`char`s), not bytes.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Punctuation that is peeled off the edges of a whitespace chunk.
pub const EDGE_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '"', '\''];

const CLITIC: &str = "n't";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// True when every char of the surface is punctuation.
    pub fn is_punct(&self) -> bool {
        !self.surface.is_empty() && self.surface.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace())
    }
}

/// A sentence and its tokens with char offsets into the sentence text.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    text: String,
    tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OffsetError {
    #[error("token {index} span {start}..{end} is out of bounds for text of {len} chars")]
    OutOfBounds { index: usize, start: usize, end: usize, len: usize },
    #[error("token {index} span {start}..{end} is empty or reversed")]
    Empty { index: usize, start: usize, end: usize },
    #[error("token {index} overlaps or precedes token {}", index - 1)]
    NotIncreasing { index: usize },
}

impl TokenSequence {
    pub fn empty() -> Self {
        TokenSequence { text: String::new(), tokens: Vec::new() }
    }

    /// Builds a sequence from explicit char spans, checking the offset invariants.
    pub fn from_spans(text: impl Into<String>, spans: &[(usize, usize)]) -> Result<Self, OffsetError> {
        let text = text.into();
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::with_capacity(spans.len());
        let mut prev_end = 0;
        for (index, &(start, end)) in spans.iter().enumerate() {
            if start >= end {
                return Err(OffsetError::Empty { index, start, end });
            }
            if end > chars.len() {
                return Err(OffsetError::OutOfBounds { index, start, end, len: chars.len() });
            }
            if index > 0 && start < prev_end {
                return Err(OffsetError::NotIncreasing { index });
            }
            prev_end = end;
            tokens.push(Token { surface: chars[start..end].iter().collect(), start, end });
        }
        Ok(TokenSequence { text, tokens })
    }

    /// Builds a sequence by joining `words` with single spaces.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let mut text = String::new();
        let mut tokens = Vec::with_capacity(words.len());
        let mut pos = 0;
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                pos += 1;
            }
            let w = w.as_ref();
            let n = w.chars().count();
            text.push_str(w);
            tokens.push(Token { surface: w.to_string(), start: pos, end: pos + n });
            pos += n;
        }
        TokenSequence { text, tokens }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Token> {
        self.tokens.get(i)
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn spans(&self) -> Vec<(usize, usize)> {
        self.tokens.iter().map(|t| (t.start, t.end)).collect()
    }

    /// Chars `start..end` of the sentence text.
    pub fn slice(&self, start: usize, end: usize) -> String {
        self.text.chars().skip(start).take(end.saturating_sub(start)).collect()
    }

    /// Surfaces joined by single spaces.
    pub fn joined(&self) -> String {
        self.surfaces().collect::<Vec<_>>().join(" ")
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

/// Word-level tokenizer interface; corpus-specific tokenizations implement this.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> TokenSequence;
}

/// Whitespace splitter that peels edge punctuation and the `n't` clitic.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleTokenizer;

impl Tokenizer for RuleTokenizer {
    fn tokenize(&self, text: &str) -> TokenSequence {
        tokenize(text)
    }
}

pub fn tokenize(text: &str) -> TokenSequence {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut tokens);
    }
    TokenSequence { text: text.to_string(), tokens }
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let push = |out: &mut Vec<Token>, s: usize, e: usize| {
        out.push(Token { surface: chars[s..e].iter().collect(), start: s, end: e });
    };
    let mut core_start = start;
    while core_start < end && EDGE_PUNCT.contains(&chars[core_start]) {
        core_start += 1;
    }
    if core_start == end {
        for p in start..end {
            push(out, p, p + 1);
        }
        return;
    }
    let mut core_end = end;
    while EDGE_PUNCT.contains(&chars[core_end - 1]) {
        core_end -= 1;
    }
    for p in start..core_start {
        push(out, p, p + 1);
    }
    let core_len = core_end - core_start;
    let clitic_len = CLITIC.chars().count();
    let has_clitic = core_len > clitic_len
        && chars[core_end - clitic_len..core_end].iter().flat_map(|c| c.to_lowercase()).eq(CLITIC.chars());
    if has_clitic {
        push(out, core_start, core_end - clitic_len);
        push(out, core_end - clitic_len, core_end);
    } else {
        push(out, core_start, core_end);
    }
    for p in core_end..end {
        push(out, p, p + 1);
    }
}

/// Lowercases char by char, the case folding used throughout the toolkit.
pub fn fold(s: &str) -> String {
    s.chars().flat_map(char::to_lowercase).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CueKind {
    Normal,
    Multiword,
    Affix,
}

impl CueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CueKind::Normal => "NORMAL",
            CueKind::Multiword => "MULTIWORD",
            CueKind::Affix => "AFFIX",
        }
    }
}

impl fmt::Display for CueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CueAnnotation {
    pub kind: CueKind,
    pub token_indices: Vec<usize>,
    /// Char span of the triggering text; a sub-token span for affixes.
    pub char_span: (usize, usize),
}

impl CueAnnotation {
    /// A single-token cue covering the whole token.
    pub fn normal(tokens: &TokenSequence, index: usize) -> Self {
        let t = &tokens.tokens()[index];
        CueAnnotation { kind: CueKind::Normal, token_indices: vec![index], char_span: (t.start, t.end) }
    }

    pub fn multiword(tokens: &TokenSequence, indices: Vec<usize>) -> Self {
        let first = &tokens.tokens()[indices[0]];
        let last = &tokens.tokens()[*indices.last().unwrap()];
        CueAnnotation { kind: CueKind::Multiword, token_indices: indices, char_span: (first.start, last.end) }
    }

    pub fn affix(index: usize, char_span: (usize, usize)) -> Self {
        CueAnnotation { kind: CueKind::Affix, token_indices: vec![index], char_span }
    }

    /// Case-folded text of the cue: token surfaces for word cues, the affix itself otherwise.
    pub fn surface(&self, tokens: &TokenSequence) -> String {
        match self.kind {
            CueKind::Affix => fold(&tokens.slice(self.char_span.0, self.char_span.1)),
            _ => self
                .token_indices
                .iter()
                .filter_map(|&i| tokens.get(i))
                .map(|t| fold(&t.surface))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScopeAnnotation {
    pub cue_index: usize,
    /// Sorted, possibly discontinuous token positions.
    pub token_indices: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceMeta {
    pub doc_id: String,
    pub sent_id: u64,
    pub corpus: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AnnotatedSentence {
    pub tokens: TokenSequence,
    pub cues: Vec<CueAnnotation>,
    pub scopes: Vec<ScopeAnnotation>,
    pub meta: SentenceMeta,
}

impl AnnotatedSentence {
    pub fn unannotated(tokens: TokenSequence, meta: SentenceMeta) -> Self {
        AnnotatedSentence { tokens, cues: Vec::new(), scopes: Vec::new(), meta }
    }

    /// Union of the scope token sets attached to `cue_index`, or `None` if it has none.
    pub fn scope_of(&self, cue_index: usize) -> Option<Vec<usize>> {
        let mut found = false;
        let mut out = Vec::new();
        for s in self.scopes.iter().filter(|s| s.cue_index == cue_index) {
            found = true;
            out.extend_from_slice(&s.token_indices);
        }
        if !found {
            return None;
        }
        out.sort_unstable();
        out.dedup();
        Some(out)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    TokenSurfaceMismatch,
    TokenSpanInvalid,
    TokenOffsetsNotIncreasing,
    CueTokenOutOfRange,
    CueArity,
    CueIndicesUnordered,
    AffixSpanCrossesToken,
    DanglingCueIndex,
    EmptyScope,
    ScopeTokenOutOfRange,
    ScopeIndicesUnordered,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Violation { code, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

/// Reports every invariant violation of `sentence`; an empty report means valid.
pub fn validate(sentence: &AnnotatedSentence) -> Vec<Violation> {
    use ViolationCode::*;

    let mut out = Vec::new();
    let seq = &sentence.tokens;
    let n_chars = seq.text().chars().count();
    let n = seq.len();

    for (i, t) in seq.tokens().iter().enumerate() {
        if t.start >= t.end || t.end > n_chars {
            out.push(Violation::new(TokenSpanInvalid, format!("token {i} span {}..{}", t.start, t.end)));
            continue;
        }
        if seq.slice(t.start, t.end) != t.surface {
            out.push(Violation::new(
                TokenSurfaceMismatch,
                format!("token {i} surface {:?} differs from text", t.surface),
            ));
        }
        if i > 0 && t.start < seq.tokens()[i - 1].end {
            out.push(Violation::new(
                TokenOffsetsNotIncreasing,
                format!("token {i} starts before token {} ends", i - 1),
            ));
        }
    }

    for (c, cue) in sentence.cues.iter().enumerate() {
        let in_range = cue.token_indices.iter().all(|&t| t < n);
        if !in_range {
            out.push(Violation::new(CueTokenOutOfRange, format!("cue {c} references a token >= {n}")));
        }
        let arity_ok = match cue.kind {
            CueKind::Normal | CueKind::Affix => cue.token_indices.len() == 1,
            CueKind::Multiword => cue.token_indices.len() >= 2,
        };
        if !arity_ok {
            out.push(Violation::new(
                CueArity,
                format!("cue {c} of kind {} has {} token(s)", cue.kind, cue.token_indices.len()),
            ));
        }
        if !cue.token_indices.windows(2).all(|w| w[0] < w[1]) {
            out.push(Violation::new(CueIndicesUnordered, format!("cue {c} token indices are not strictly increasing")));
        }
        if cue.kind == CueKind::Affix && in_range && cue.token_indices.len() == 1 {
            let host = &seq.tokens()[cue.token_indices[0]];
            let (s, e) = cue.char_span;
            if s >= e || s < host.start || e > host.end {
                out.push(Violation::new(
                    AffixSpanCrossesToken,
                    format!("cue {c} span {s}..{e} is not inside token {}..{}", host.start, host.end),
                ));
            }
        }
    }

    for (k, scope) in sentence.scopes.iter().enumerate() {
        if scope.cue_index >= sentence.cues.len() {
            out.push(Violation::new(
                DanglingCueIndex,
                format!("scope {k} refers to cue {} of {}", scope.cue_index, sentence.cues.len()),
            ));
        }
        if scope.token_indices.is_empty() {
            out.push(Violation::new(EmptyScope, format!("scope {k} has no tokens")));
        }
        if scope.token_indices.iter().any(|&t| t >= n) {
            out.push(Violation::new(ScopeTokenOutOfRange, format!("scope {k} references a token >= {n}")));
        }
        if !scope.token_indices.windows(2).all(|w| w[0] < w[1]) {
            out.push(Violation::new(
                ScopeIndicesUnordered,
                format!("scope {k} token indices are not strictly increasing"),
            ));
        }
    }
    out
}
