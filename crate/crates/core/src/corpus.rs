//! Line-delimited JSON interchange format for annotated corpora.
//!
//! One object per line:
//! `{"doc_id","sent_id","corpus","text","tokens":[{"s","e"}],"cues":[{"kind","toks","span"}],"scopes":[{"cue","toks"}]}`
//! with char offsets. Extracted corpora may add an optional `"source"` field.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::text::{validate, AnnotatedSentence, CueAnnotation, CueKind, ScopeAnnotation, SentenceMeta, TokenSequence};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub s: usize,
    pub e: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueRecord {
    pub kind: CueKind,
    pub toks: Vec<usize>,
    pub span: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeRecord {
    pub cue: usize,
    pub toks: Vec<usize>,
}

/// Wire shape of one corpus line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub doc_id: String,
    pub sent_id: u64,
    pub corpus: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub text: String,
    pub tokens: Vec<TokenRecord>,
    #[serde(default)]
    pub cues: Vec<CueRecord>,
    #[serde(default)]
    pub scopes: Vec<ScopeRecord>,
}

impl From<&AnnotatedSentence> for SentenceRecord {
    fn from(s: &AnnotatedSentence) -> Self {
        SentenceRecord {
            doc_id: s.meta.doc_id.clone(),
            sent_id: s.meta.sent_id,
            corpus: s.meta.corpus.clone(),
            source: None,
            text: s.tokens.text().to_string(),
            tokens: s.tokens.tokens().iter().map(|t| TokenRecord { s: t.start, e: t.end }).collect(),
            cues: s
                .cues
                .iter()
                .map(|c| CueRecord {
                    kind: c.kind,
                    toks: c.token_indices.clone(),
                    span: [c.char_span.0, c.char_span.1],
                })
                .collect(),
            scopes: s.scopes.iter().map(|x| ScopeRecord { cue: x.cue_index, toks: x.token_indices.clone() }).collect(),
        }
    }
}

impl SentenceRecord {
    /// Converts to an annotated sentence and runs validation; `line` is used in errors.
    pub fn into_sentence(self, line: usize) -> Result<AnnotatedSentence, CorpusError> {
        let spans: Vec<(usize, usize)> = self.tokens.iter().map(|t| (t.s, t.e)).collect();
        let tokens = TokenSequence::from_spans(self.text, &spans)
            .map_err(|e| CorpusError::Schema { line, message: e.to_string() })?;
        let sentence = AnnotatedSentence {
            tokens,
            cues: self
                .cues
                .into_iter()
                .map(|c| CueAnnotation { kind: c.kind, token_indices: c.toks, char_span: (c.span[0], c.span[1]) })
                .collect(),
            scopes: self
                .scopes
                .into_iter()
                .map(|s| ScopeAnnotation { cue_index: s.cue, token_indices: s.toks })
                .collect(),
            meta: SentenceMeta { doc_id: self.doc_id, sent_id: self.sent_id, corpus: self.corpus },
        };
        let report = validate(&sentence);
        if let Some(first) = report.first() {
            return Err(CorpusError::Schema { line, message: first.to_string() });
        }
        Ok(sentence)
    }
}

/// Parses one JSON line (1-based `line` for messages).
pub fn parse_line(text: &str, line: usize) -> Result<AnnotatedSentence, CorpusError> {
    let record: SentenceRecord =
        serde_json::from_str(text).map_err(|e| CorpusError::Parse { line, message: e.to_string() })?;
    record.into_sentence(line)
}

/// Reads a whole corpus; blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, i + 1)?);
    }
    Ok(out)
}

pub fn read_corpus_file(path: impl AsRef<std::path::Path>) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let f = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(f))
}

pub fn to_line(sentence: &AnnotatedSentence) -> String {
    record_line(&SentenceRecord::from(sentence))
}

pub fn record_line(record: &SentenceRecord) -> String {
    serde_json::to_string(record).expect("corpus records always serialize")
}

pub fn write_corpus<'a, W, I>(mut w: W, sentences: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a AnnotatedSentence>,
{
    for s in sentences {
        writeln!(w, "{}", to_line(s))?;
    }
    Ok(())
}
