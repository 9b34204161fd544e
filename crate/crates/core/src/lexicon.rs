//! Surface-form negation cue lexicon and deterministic cue matching.
//!
//! Matching rules:
//! * comparisons are case-insensitive ([`fold`]);
//! * word patterns (NORMAL, MULTIWORD, PSEUDO) match contiguous token runs;
//! * PREFIX/SUFFIX patterns match inside one token when at least
//!   [`CueLexicon::affix_min_remainder`] chars of the token remain;
//! * candidates are taken longest first, then leftmost, then by category rank
//!   (PSEUDO, MULTIWORD, NORMAL, PREFIX, SUFFIX), then by entry order; a
//!   candidate is kept only if none of its tokens is already taken.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::text::{fold, CueAnnotation, CueKind, TokenSequence};

pub const DEFAULT_AFFIX_MIN_REMAINDER: usize = 4;

const GENERAL_TSV: &str = include_str!("../../../data/lexicon/negex_general.tsv");
const BIOMEDICAL_TSV: &str = include_str!("../../../data/lexicon/biomedical.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Normal,
    Multiword,
    Prefix,
    Suffix,
    Pseudo,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Normal, Category::Multiword, Category::Prefix, Category::Suffix, Category::Pseudo];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Normal => "NORMAL",
            Category::Multiword => "MULTIWORD",
            Category::Prefix => "PREFIX",
            Category::Suffix => "SUFFIX",
            Category::Pseudo => "PSEUDO",
        }
    }

    /// Precedence among equal-length candidates; lower wins.
    pub fn rank(self) -> u8 {
        match self {
            Category::Pseudo => 0,
            Category::Multiword => 1,
            Category::Normal => 2,
            Category::Prefix => 3,
            Category::Suffix => 4,
        }
    }

    pub fn is_affix(self) -> bool {
        matches!(self, Category::Prefix | Category::Suffix)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub category: Category,
    pub source: Option<String>,
}

impl LexiconEntry {
    pub fn new(pattern: &str, category: Category) -> Self {
        LexiconEntry { pattern: normalize_pattern(pattern), category, source: None }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.pattern.split(' ')
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexiconError {
    #[error("line {line}: expected `pattern<TAB>category[<TAB>source]`, got {found} field(s)")]
    Malformed { line: usize, found: usize },
    #[error("line {line}: {message}")]
    UnknownCategory { line: usize, message: String },
    #[error("line {line}: {message}")]
    InvalidPattern { line: usize, message: String },
    #[error("reading lexicon: {0}")]
    Io(String),
}

fn normalize_pattern(p: &str) -> String {
    fold(&p.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn check_pattern(pattern: &str, category: Category) -> Result<(), String> {
    if pattern.is_empty() {
        return Err("empty pattern".into());
    }
    let spaced = pattern.contains(' ');
    match category {
        Category::Multiword if !spaced => Err(format!("MULTIWORD pattern {pattern:?} has no internal space")),
        Category::Normal | Category::Prefix | Category::Suffix if spaced => {
            Err(format!("{category} pattern {pattern:?} must be a single word"))
        }
        _ => Ok(()),
    }
}

/// A deduplicated, immutable cue dictionary.
#[derive(Clone, Debug)]
pub struct CueLexicon {
    entries: Vec<LexiconEntry>,
    affix_min_remainder: usize,
    // first word -> entry indices of word patterns
    by_first_word: HashMap<String, Vec<usize>>,
    affixes: Vec<usize>,
}

impl PartialEq for CueLexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.affix_min_remainder == other.affix_min_remainder
    }
}

impl Default for CueLexicon {
    fn default() -> Self {
        CueLexicon::new(Vec::new())
    }
}

impl CueLexicon {
    /// Builds a lexicon, keeping the first occurrence of every `(pattern, category)`.
    ///
    /// Patterns are normalized but not checked; use [`CueLexicon::load`] for validated input.
    pub fn new(entries: impl IntoIterator<Item = LexiconEntry>) -> Self {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for mut e in entries {
            e.pattern = normalize_pattern(&e.pattern);
            if seen.insert((e.pattern.clone(), e.category)) {
                kept.push(e);
            }
        }
        let mut by_first_word: HashMap<String, Vec<usize>> = HashMap::new();
        let mut affixes = Vec::new();
        for (i, e) in kept.iter().enumerate() {
            if e.category.is_affix() {
                affixes.push(i);
            } else if let Some(first) = e.words().next() {
                by_first_word.entry(first.to_string()).or_default().push(i);
            }
        }
        CueLexicon { entries: kept, affix_min_remainder: DEFAULT_AFFIX_MIN_REMAINDER, by_first_word, affixes }
    }

    pub fn with_affix_min_remainder(mut self, n: usize) -> Self {
        self.affix_min_remainder = n;
        self
    }

    pub fn affix_min_remainder(&self) -> usize {
        self.affix_min_remainder
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the TSV format: `pattern<TAB>category[<TAB>source]`, `#` comments.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| LexiconError::Io(e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(LexiconError::Malformed { line: line_no, found: fields.len() });
            }
            let category: Category =
                fields[1].parse().map_err(|message| LexiconError::UnknownCategory { line: line_no, message })?;
            let pattern = normalize_pattern(fields[0]);
            check_pattern(&pattern, category)
                .map_err(|message| LexiconError::InvalidPattern { line: line_no, message })?;
            let source = fields.get(2).map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
            entries.push(LexiconEntry { pattern, category, source });
        }
        Ok(CueLexicon::new(entries))
    }

    pub fn load_str(s: &str) -> Result<Self, LexiconError> {
        Self::load(s.as_bytes())
    }

    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<Self, LexiconError> {
        let f = std::fs::File::open(path.as_ref())
            .map_err(|e| LexiconError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::load(std::io::BufReader::new(f))
    }

    /// The shipped general-domain trigger list.
    pub fn general() -> Self {
        Self::load_str(GENERAL_TSV).expect("bundled general lexicon parses")
    }

    /// The shipped biomedical additions.
    pub fn biomedical() -> Self {
        Self::load_str(BIOMEDICAL_TSV).expect("bundled biomedical lexicon parses")
    }

    /// General list extended with the biomedical additions.
    pub fn bundled() -> Self {
        merge(&Self::general(), &Self::biomedical())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.pattern);
            out.push('\t');
            out.push_str(e.category.as_str());
            if let Some(src) = &e.source {
                out.push('\t');
                out.push_str(src);
            }
            out.push('\n');
        }
        out
    }

    /// Categories whose patterns could fire on this token in isolation: word
    /// membership for word patterns, affix fit for PREFIX/SUFFIX.
    pub fn token_categories(&self, surface: &str) -> Vec<Category> {
        let folded = fold(surface);
        let mut cats: Vec<Category> = Vec::new();
        for e in &self.entries {
            if cats.contains(&e.category) {
                continue;
            }
            let hit = match e.category {
                Category::Prefix => affix_span(&folded, &e.pattern, true, self.affix_min_remainder).is_some(),
                Category::Suffix => affix_span(&folded, &e.pattern, false, self.affix_min_remainder).is_some(),
                _ => e.words().any(|w| w == folded),
            };
            if hit {
                cats.push(e.category);
            }
        }
        cats.sort();
        cats
    }
}

/// Union of two lexicons: `base` order first, then entries of `extra` not already present.
pub fn merge(base: &CueLexicon, extra: &CueLexicon) -> CueLexicon {
    CueLexicon::new(base.entries.iter().chain(extra.entries.iter()).cloned())
        .with_affix_min_remainder(base.affix_min_remainder)
}

/// One cue found by [`match_cues`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CueMatch {
    pub kind: CueKind,
    pub token_indices: Vec<usize>,
    pub char_span: (usize, usize),
    pub matched_pattern: String,
    pub category: Category,
}

impl CueMatch {
    /// PSEUDO matches are reported but do not negate.
    pub fn is_negating(&self) -> bool {
        self.category != Category::Pseudo
    }

    pub fn to_annotation(&self) -> CueAnnotation {
        CueAnnotation { kind: self.kind, token_indices: self.token_indices.clone(), char_span: self.char_span }
    }
}

/// Char offsets (relative to the token) of `affix` at the start or end of `folded_token`.
fn affix_span(folded_token: &str, affix: &str, prefix: bool, min_remainder: usize) -> Option<(usize, usize)> {
    let tok_len = folded_token.chars().count();
    let aff_len = affix.chars().count();
    if aff_len == 0 || tok_len < aff_len + min_remainder {
        return None;
    }
    if prefix && folded_token.starts_with(affix) {
        Some((0, aff_len))
    } else if !prefix && folded_token.ends_with(affix) {
        Some((tok_len - aff_len, tok_len))
    } else {
        None
    }
}

struct Candidate {
    start: usize,
    len: usize,
    category: Category,
    entry: usize,
    char_span: (usize, usize),
}

/// Finds non-overlapping cue matches, ordered by start token.
pub fn match_cues(tokens: &TokenSequence, lex: &CueLexicon) -> Vec<CueMatch> {
    let toks = tokens.tokens();
    // char-by-char folding keeps char counts aligned with the original surface
    // for the scripts the toolkit targets
    let folded: Vec<String> = toks.iter().map(|t| fold(&t.surface)).collect();
    let mut cands = Vec::new();

    for start in 0..toks.len() {
        if let Some(ids) = lex.by_first_word.get(&folded[start]) {
            for &id in ids {
                let e = &lex.entries[id];
                let words: Vec<&str> = e.words().collect();
                let end = start + words.len();
                if end <= toks.len() && words.iter().zip(&folded[start..end]).all(|(w, f)| *w == f) {
                    cands.push(Candidate {
                        start,
                        len: words.len(),
                        category: e.category,
                        entry: id,
                        char_span: (toks[start].start, toks[end - 1].end),
                    });
                }
            }
        }
        for &id in &lex.affixes {
            let e = &lex.entries[id];
            let prefix = e.category == Category::Prefix;
            if let Some((s, t)) = affix_span(&folded[start], &e.pattern, prefix, lex.affix_min_remainder) {
                let base = toks[start].start;
                cands.push(Candidate {
                    start,
                    len: 1,
                    category: e.category,
                    entry: id,
                    char_span: (base + s, base + t),
                });
            }
        }
    }

    cands.sort_by(|a, b| {
        b.len
            .cmp(&a.len)
            .then(a.start.cmp(&b.start))
            .then(a.category.rank().cmp(&b.category.rank()))
            .then(a.entry.cmp(&b.entry))
    });

    let mut taken = vec![false; toks.len()];
    let mut out = Vec::new();
    for c in cands {
        let span = c.start..c.start + c.len;
        if taken[span.clone()].iter().any(|&t| t) {
            continue;
        }
        taken[span.clone()].iter_mut().for_each(|t| *t = true);
        let kind = match c.category {
            Category::Prefix | Category::Suffix => CueKind::Affix,
            _ if c.len > 1 => CueKind::Multiword,
            _ => CueKind::Normal,
        };
        out.push(CueMatch {
            kind,
            token_indices: span.collect(),
            char_span: c.char_span,
            matched_pattern: lex.entries[c.entry].pattern.clone(),
            category: c.category,
        });
    }
    out.sort_by_key(|m| m.token_indices[0]);
    out
}

/// Matches that actually negate (PSEUDO removed).
pub fn negating_cues(tokens: &TokenSequence, lex: &CueLexicon) -> Vec<CueMatch> {
    match_cues(tokens, lex).into_iter().filter(CueMatch::is_negating).collect()
}
