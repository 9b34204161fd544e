//! Template-grammar generator for synthetic annotated negation corpora.
//!
//! Grammar files are plain text, one directive per line; `#` starts a comment.
//!
//! ```text
//! name clinical
//! density 0.6
//! slot FINDING = vomiting | heart murmur | lameness
//! template {CUE} {FINDING} seen .
//! template owner reports {FINDING} .
//! cue right-until-punct no
//! cue whole-clause negative for
//! ```
//!
//! `slot NAME = a | b` declares a vocabulary (values may span several words),
//! `template` lists whitespace-separated tokens where `{NAME}` draws from a slot
//! and `{CUE}` injects one of the `cue` rules, and `density` is the probability
//! that a sentence is built from a cue-bearing template. Scope rules are
//! `right-until-punct` (tokens after the cue up to punctuation or the next cue)
//! and `whole-clause` (the punctuation-delimited clause around the cue, minus cues).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::rng::stream;
use crate::text::{fold, AnnotatedSentence, CueAnnotation, ScopeAnnotation, SentenceMeta, TokenSequence};

const CUE_SLOT: &str = "CUE";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GrammarError {
    #[error("grammar line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("grammar has no templates")]
    NoTemplates,
    #[error("grammar is inconsistent: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?} (available: clinical, review)")]
    UnknownPreset(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScopeRule {
    RightUntilPunct,
    WholeClause,
}

impl ScopeRule {
    pub fn as_str(self) -> &'static str {
        match self {
            ScopeRule::RightUntilPunct => "right-until-punct",
            ScopeRule::WholeClause => "whole-clause",
        }
    }
}

impl fmt::Display for ScopeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScopeRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "right-until-punct" => Ok(ScopeRule::RightUntilPunct),
            "whole-clause" => Ok(ScopeRule::WholeClause),
            other => Err(format!("unknown scope rule {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateItem {
    Word(String),
    Slot(String),
    Cue,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CueRule {
    /// Cue words, injected verbatim.
    pub words: Vec<String>,
    pub scope: ScopeRule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grammar {
    pub name: String,
    pub density: f64,
    pub slots: BTreeMap<String, Vec<Vec<String>>>,
    pub templates: Vec<Vec<TemplateItem>>,
    pub cues: Vec<CueRule>,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn is_punct_word(w: &str) -> bool {
    !w.is_empty() && w.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace())
}

fn valid_slot_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

impl Grammar {
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut g = Grammar {
            name: "synthetic".into(),
            density: 0.6,
            slots: BTreeMap::new(),
            templates: Vec::new(),
            cues: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| GrammarError::Line { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (directive, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
            let rest = rest.trim();
            match directive {
                "name" => {
                    if rest.is_empty() || rest.contains(char::is_whitespace) {
                        return Err(err("name must be a single word".into()));
                    }
                    g.name = rest.to_string();
                }
                "density" => {
                    g.density = rest
                        .parse::<f64>()
                        .ok()
                        .filter(|d| (0.0..=1.0).contains(d))
                        .ok_or_else(|| err(format!("density must be a number in [0, 1], found {rest:?}")))?;
                }
                "slot" => {
                    let (name, values) =
                        rest.split_once('=').ok_or_else(|| err("expected `slot NAME = value | value`".into()))?;
                    let name = name.trim();
                    if !valid_slot_name(name) || name == CUE_SLOT {
                        return Err(err(format!("invalid slot name {name:?}")));
                    }
                    let values: Vec<Vec<String>> = values.split('|').map(words).collect();
                    if values.iter().any(Vec::is_empty) {
                        return Err(err(format!("slot {name} has an empty value")));
                    }
                    g.slots.entry(name.to_string()).or_default().extend(values);
                }
                "template" => {
                    let items = rest
                        .split_whitespace()
                        .map(|w| match w.strip_prefix('{').and_then(|w| w.strip_suffix('}')) {
                            Some(CUE_SLOT) => TemplateItem::Cue,
                            Some(name) => TemplateItem::Slot(name.to_string()),
                            None => TemplateItem::Word(w.to_string()),
                        })
                        .collect::<Vec<_>>();
                    if items.is_empty() {
                        return Err(err("empty template".into()));
                    }
                    g.templates.push(items);
                }
                "cue" => {
                    let (rule, pattern) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| err("expected `cue RULE words...`".into()))?;
                    let scope = rule.parse::<ScopeRule>().map_err(err)?;
                    g.cues.push(CueRule { words: words(pattern), scope });
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        g.check()?;
        Ok(g)
    }

    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<Self, GrammarError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GrammarError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self, GrammarError> {
        let text = match name {
            "clinical" => include_str!("../../../data/grammars/clinical.grammar"),
            "review" => include_str!("../../../data/grammars/review.grammar"),
            other => return Err(GrammarError::UnknownPreset(other.to_string())),
        };
        Self::parse(text)
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["clinical", "review"]
    }

    fn has_cue(template: &[TemplateItem]) -> bool {
        template.contains(&TemplateItem::Cue)
    }

    /// Checks that the grammar can only produce valid annotations.
    pub fn check(&self) -> Result<(), GrammarError> {
        if self.templates.is_empty() {
            return Err(GrammarError::NoTemplates);
        }
        let invalid = |m: String| Err(GrammarError::Invalid(m));
        if !(0.0..=1.0).contains(&self.density) {
            return invalid(format!("density {} outside [0, 1]", self.density));
        }
        let cue_words: BTreeSet<String> = self.cues.iter().flat_map(|c| c.words.iter().map(|w| fold(w))).collect();
        for c in &self.cues {
            if c.words.is_empty() || c.words.iter().any(|w| is_punct_word(w)) {
                return invalid(format!("cue {:?} must consist of words", c.words.join(" ")));
            }
        }
        for t in &self.templates {
            for (k, item) in t.iter().enumerate() {
                match item {
                    TemplateItem::Slot(name) if !self.slots.contains_key(name) => {
                        return invalid(format!("template uses undeclared slot {{{name}}}"));
                    }
                    TemplateItem::Word(w) if cue_words.contains(&fold(w)) => {
                        return invalid(format!("template word {w:?} is also a cue word"));
                    }
                    TemplateItem::Cue => {
                        let next_ok = match t.get(k + 1) {
                            Some(TemplateItem::Word(w)) => !is_punct_word(w),
                            Some(TemplateItem::Slot(_)) => true,
                            _ => false,
                        };
                        if !next_ok {
                            return invalid("{CUE} must be followed by a word or slot".into());
                        }
                    }
                    _ => {}
                }
            }
        }
        for (name, values) in &self.slots {
            for w in values.iter().flatten() {
                if cue_words.contains(&fold(w)) {
                    return invalid(format!("slot {name} value word {w:?} is also a cue word"));
                }
                if is_punct_word(w) {
                    return invalid(format!("slot {name} value word {w:?} is punctuation"));
                }
            }
        }
        if self.density > 0.0 {
            if self.cues.is_empty() {
                return invalid("density is positive but no cue rules are declared".into());
            }
            if !self.templates.iter().any(|t| Self::has_cue(t)) {
                return invalid("density is positive but no template contains {CUE}".into());
            }
        }
        Ok(())
    }
}

/// Token positions a rule assigns to the cue at `cue_tokens`, given which
/// positions are cue tokens and which are punctuation.
pub fn scope_by_rule(rule: ScopeRule, cue_tokens: &[usize], is_cue: &[bool], is_punct: &[bool]) -> Vec<usize> {
    let n = is_cue.len();
    let last = *cue_tokens.last().expect("cue has tokens");
    match rule {
        ScopeRule::RightUntilPunct => (last + 1..n).take_while(|&i| !is_punct[i] && !is_cue[i]).collect(),
        ScopeRule::WholeClause => {
            let first = cue_tokens[0];
            let start = (0..first).rev().find(|&i| is_punct[i]).map_or(0, |i| i + 1);
            let end = (last + 1..n).find(|&i| is_punct[i]).unwrap_or(n);
            (start..end).filter(|&i| !is_cue[i]).collect()
        }
    }
}

fn realize(grammar: &Grammar, index: usize, seed: u64) -> AnnotatedSentence {
    let mut rng = stream(seed, &["synth".into(), (&grammar.name).into(), index.into()]);
    let cue_templates: Vec<&Vec<TemplateItem>> = grammar.templates.iter().filter(|t| Grammar::has_cue(t)).collect();
    let plain_templates: Vec<&Vec<TemplateItem>> = grammar.templates.iter().filter(|t| !Grammar::has_cue(t)).collect();
    let negated = !cue_templates.is_empty() && !grammar.cues.is_empty() && rng.gen::<f64>() < grammar.density;
    let (template, inject) = if negated {
        (*cue_templates.choose(&mut rng).expect("non-empty"), true)
    } else if let Some(t) = plain_templates.choose(&mut rng) {
        (*t, false)
    } else {
        (*cue_templates.choose(&mut rng).expect("grammar has templates"), false)
    };

    let mut out: Vec<String> = Vec::new();
    let mut injected: Vec<(Vec<usize>, ScopeRule)> = Vec::new();
    for item in template {
        match item {
            TemplateItem::Word(w) => out.push(w.clone()),
            TemplateItem::Slot(name) => {
                let value = grammar.slots[name].choose(&mut rng).expect("slot has values");
                out.extend(value.iter().cloned());
            }
            TemplateItem::Cue if inject => {
                let rule = grammar.cues.choose(&mut rng).expect("cue rules exist");
                let start = out.len();
                out.extend(rule.words.iter().cloned());
                injected.push(((start..out.len()).collect(), rule.scope));
            }
            TemplateItem::Cue => {}
        }
    }

    let tokens = TokenSequence::from_words(&out);
    let mut is_cue = vec![false; out.len()];
    for (idx, _) in &injected {
        for &i in idx {
            is_cue[i] = true;
        }
    }
    let is_punct: Vec<bool> = tokens.tokens().iter().map(|t| t.is_punct()).collect();
    let mut cues = Vec::new();
    let mut scopes = Vec::new();
    for (k, (idx, rule)) in injected.iter().enumerate() {
        cues.push(if idx.len() == 1 {
            CueAnnotation::normal(&tokens, idx[0])
        } else {
            CueAnnotation::multiword(&tokens, idx.clone())
        });
        let scope = scope_by_rule(*rule, idx, &is_cue, &is_punct);
        if !scope.is_empty() {
            scopes.push(ScopeAnnotation { cue_index: k, token_indices: scope });
        }
    }
    let meta = SentenceMeta { doc_id: grammar.name.clone(), sent_id: index as u64, corpus: grammar.name.clone() };
    AnnotatedSentence { tokens, cues, scopes, meta }
}

/// `n` sentences from `grammar`; sentence `i` depends only on `(seed, name, i)`.
pub fn generate(grammar: &Grammar, n: usize, seed: u64) -> Result<Vec<AnnotatedSentence>, GrammarError> {
    grammar.check()?;
    Ok((0..n).into_par_iter().map(|i| realize(grammar, i, seed)).collect())
}
