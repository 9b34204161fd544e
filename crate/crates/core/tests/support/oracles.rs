//! Brute-force reference implementations and random data generators shared by
//! the property tests and the acceptance suite.

#![allow(dead_code)]

use negkit::lexicon::{Category, LexiconEntry};
use negkit::synth::ScopeRule;
use negkit::text::{AnnotatedSentence, CueAnnotation, CueKind, ScopeAnnotation, SentenceMeta, TokenSequence};
use negkit::Task;
use rand::seq::SliceRandom;
use rand::Rng;

/// `(token indices, char span, category)` for every match, sorted by first token.
pub type OracleMatch = (Vec<usize>, (usize, usize), Category);

/// Scans window lengths from longest to shortest and positions left to right;
/// at each free window the best-ranked matching entry (then earliest entry) wins.
pub fn match_oracle(tokens: &TokenSequence, entries: &[LexiconEntry], min_remainder: usize) -> Vec<OracleMatch> {
    let words: Vec<String> = tokens.surfaces().map(|s| s.to_lowercase()).collect();
    let n = words.len();
    let max_len = entries.iter().map(|e| e.pattern.split(' ').count()).max().unwrap_or(0);
    let mut taken = vec![false; n];
    let mut out: Vec<OracleMatch> = Vec::new();
    for len in (1..=max_len.min(n)).rev() {
        for start in 0..=n - len {
            if taken[start..start + len].iter().any(|&t| t) {
                continue;
            }
            let mut ranked: Vec<(usize, &LexiconEntry)> = entries.iter().enumerate().collect();
            ranked.sort_by_key(|(i, e)| (rank(e.category), *i));
            for (_, e) in ranked {
                if let Some(span) = entry_matches(e, &words[start..start + len], tokens, start, min_remainder) {
                    taken[start..start + len].iter_mut().for_each(|t| *t = true);
                    out.push(((start..start + len).collect(), span, e.category));
                    break;
                }
            }
        }
    }
    out.sort_by_key(|m| m.0[0]);
    out
}

fn rank(c: Category) -> u8 {
    match c {
        Category::Pseudo => 0,
        Category::Multiword => 1,
        Category::Normal => 2,
        Category::Prefix => 3,
        Category::Suffix => 4,
    }
}

fn entry_matches(
    e: &LexiconEntry,
    window: &[String],
    tokens: &TokenSequence,
    start: usize,
    min_remainder: usize,
) -> Option<(usize, usize)> {
    let tok = &tokens.tokens()[start];
    match e.category {
        Category::Prefix | Category::Suffix => {
            if window.len() != 1 {
                return None;
            }
            let w: Vec<char> = window[0].chars().collect();
            let a: Vec<char> = e.pattern.chars().collect();
            if a.is_empty() || w.len() < a.len() + min_remainder {
                return None;
            }
            if e.category == Category::Prefix && w[..a.len()] == a[..] {
                Some((tok.start, tok.start + a.len()))
            } else if e.category == Category::Suffix && w[w.len() - a.len()..] == a[..] {
                Some((tok.end - a.len(), tok.end))
            } else {
                None
            }
        }
        _ => {
            let pattern: Vec<&str> = e.pattern.split(' ').collect();
            let last = &tokens.tokens()[start + window.len() - 1];
            (pattern.len() == window.len() && pattern.iter().zip(window).all(|(p, w)| p == w))
                .then_some((tok.start, last.end))
        }
    }
}

/// Per-token confusion counts `(tp, fp, fn)` over every aligned pair.
pub fn confusion_oracle(gold: &[Vec<u8>], pred: &[Vec<u8>], task: Task) -> (usize, usize, usize) {
    let positive = |l: u8| match task {
        Task::Cue => l != 3,
        Task::Scope => l == 1,
    };
    let mut counts = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        for k in 0..g.len() {
            match (positive(g[k]), positive(p[k])) {
                (true, true) => counts.0 += 1,
                (false, true) => counts.1 += 1,
                (true, false) => counts.2 += 1,
                _ => {}
            }
        }
    }
    counts
}

/// Tokens a scope rule should assign, phrased as quantified conditions over the sentence.
pub fn scope_rule_oracle(sentence: &AnnotatedSentence, cue: &CueAnnotation, rule: ScopeRule) -> Vec<usize> {
    let n = sentence.tokens.len();
    let punct = |i: usize| sentence.tokens.tokens()[i].surface.chars().all(|c| !c.is_alphanumeric());
    let any_cue = |i: usize| sentence.cues.iter().any(|c| c.token_indices.contains(&i));
    let first = cue.token_indices[0];
    let last = *cue.token_indices.last().unwrap();
    (0..n)
        .filter(|&j| match rule {
            ScopeRule::RightUntilPunct => j > last && (last + 1..=j).all(|k| !punct(k) && !any_cue(k)),
            ScopeRule::WholeClause => {
                let (lo, hi) = if j < first { (j, first) } else { (last, j) };
                !any_cue(j) && (lo..=hi).all(|k| !punct(k))
            }
        })
        .collect()
}

const WORDS: &[&str] = &["the", "dog", "was", "seen", "no", "not", "pain", "fever", "cough", "and", "."];

/// A random valid annotation: non-overlapping cues (contiguous multiword runs
/// separated from other multiword runs), and a non-empty scope for most cues.
pub fn random_annotation<R: Rng>(rng: &mut R) -> AnnotatedSentence {
    let n = rng.gen_range(1..=14);
    let words: Vec<String> = (0..n)
        .map(|_| {
            let w = *WORDS.choose(rng).unwrap();
            if rng.gen_bool(0.2) {
                format!("un{w}able")
            } else {
                w.to_string()
            }
        })
        .collect();
    let tokens = TokenSequence::from_words(&words);
    let mut cues = Vec::new();
    let mut i = 0;
    let mut prev_multi_end = None;
    while i < n {
        let roll: f64 = rng.gen();
        if roll < 0.15 {
            cues.push(CueAnnotation::normal(&tokens, i));
            i += 1;
        } else if roll < 0.25 && i + 1 < n && prev_multi_end != Some(i) {
            let len = rng.gen_range(2..=3.min(n - i));
            cues.push(CueAnnotation::multiword(&tokens, (i..i + len).collect()));
            i += len;
            prev_multi_end = Some(i);
        } else if roll < 0.32 {
            let t = &tokens.tokens()[i];
            let a = rng.gen_range(1..=t.len());
            cues.push(CueAnnotation::affix(i, (t.start, t.start + a)));
            i += 1;
        } else {
            i += 1;
        }
    }
    let mut scopes = Vec::new();
    for k in 0..cues.len() {
        if rng.gen_bool(0.85) {
            let mut toks: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
            if toks.is_empty() {
                toks.push(rng.gen_range(0..n));
            }
            scopes.push(ScopeAnnotation { cue_index: k, token_indices: toks });
        }
    }
    let meta = SentenceMeta { doc_id: "rand".into(), sent_id: 0, corpus: "rand".into() };
    AnnotatedSentence { tokens, cues, scopes, meta }
}

/// The cue set `decode_cue` can recover: affix spans widened to their token.
pub fn decodable_cues(sentence: &AnnotatedSentence) -> Vec<CueAnnotation> {
    sentence
        .cues
        .iter()
        .map(|c| match c.kind {
            CueKind::Affix => {
                let t = &sentence.tokens.tokens()[c.token_indices[0]];
                CueAnnotation::affix(c.token_indices[0], (t.start, t.end))
            }
            _ => c.clone(),
        })
        .collect()
}

const LEX_WORDS: &[&str] = &[
    "no", "not", "never", "without", "sure", "longer", "evidence", "of", "pain", "fever", "the", "dog", "was",
    "unhappy", "nonsense", "careless", "hopeless", "unclear", "denies", "absence",
];

/// A random sentence over a vocabulary of at most 20 words.
pub fn random_words<R: Rng>(rng: &mut R) -> TokenSequence {
    let n = rng.gen_range(0..=12);
    let words: Vec<String> = (0..n)
        .map(|_| {
            let w = *LEX_WORDS.choose(rng).unwrap();
            if rng.gen_bool(0.15) {
                w.to_uppercase()
            } else {
                w.to_string()
            }
        })
        .collect();
    TokenSequence::from_words(&words)
}

/// A random lexicon of at most 10 entries drawn from the same vocabulary.
pub fn random_lexicon<R: Rng>(rng: &mut R) -> Vec<LexiconEntry> {
    let k = rng.gen_range(1..=10);
    (0..k)
        .map(|_| match rng.gen_range(0..5) {
            0 => LexiconEntry::new(LEX_WORDS.choose(rng).unwrap(), Category::Normal),
            1 => LexiconEntry::new(LEX_WORDS.choose(rng).unwrap(), Category::Pseudo),
            2 => {
                let len = rng.gen_range(2..=3);
                let p: Vec<&str> = (0..len).map(|_| *LEX_WORDS.choose(rng).unwrap()).collect();
                let cat = if rng.gen_bool(0.7) { Category::Multiword } else { Category::Pseudo };
                LexiconEntry::new(&p.join(" "), cat)
            }
            3 => LexiconEntry::new(["un", "non", "no"].choose(rng).unwrap(), Category::Prefix),
            _ => LexiconEntry::new(["less", "ness", "ar"].choose(rng).unwrap(), Category::Suffix),
        })
        .collect()
}
