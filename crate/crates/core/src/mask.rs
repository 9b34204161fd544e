//! Masked pre-training instances with always-masked negation cues.
//!
//! Cue words are replaced by [`CUE_TOKEN`] (when cue masking is on) and are
//! never part of the random-selection pool. Every other word is selected with
//! probability `random_rate` and then masked, replaced by a random vocabulary
//! piece, or kept, per `action_split`. Selection is whole-word: all pieces of a
//! word share one action.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::text::AnnotatedSentence;

pub const CUE_TOKEN: &str = "[CUE]";
pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskAction {
    None,
    Cue,
    Mask,
    Random,
    KeepLabeled,
}

impl MaskAction {
    /// Whether the word was picked by random selection (as opposed to cue masking).
    pub fn is_selected(self) -> bool {
        matches!(self, MaskAction::Mask | MaskAction::Random | MaskAction::KeepLabeled)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaskError {
    #[error("random_rate must lie in [0, 1], got {0}")]
    Rate(f64),
    #[error("action split must be non-negative and sum to 1, got {mask}/{random}/{keep}")]
    Split { mask: f64, random: f64, keep: f64 },
    #[error("forced selection names word {index} but the sentence has {len} words")]
    ForcedOutOfRange { index: usize, len: usize },
    #[error("forced selection must use MASK, RANDOM or KEEP_LABELED")]
    ForcedAction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPolicy {
    pub random_rate: f64,
    pub mask_prob: f64,
    pub random_prob: f64,
    pub keep_prob: f64,
    pub cue_masking: bool,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        MaskPolicy { random_rate: 0.15, mask_prob: 0.8, random_prob: 0.1, keep_prob: 0.1, cue_masking: true }
    }
}

impl MaskPolicy {
    pub fn validate(&self) -> Result<(), MaskError> {
        if !(0.0..=1.0).contains(&self.random_rate) {
            return Err(MaskError::Rate(self.random_rate));
        }
        let parts = [self.mask_prob, self.random_prob, self.keep_prob];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MaskError::Split { mask: self.mask_prob, random: self.random_prob, keep: self.keep_prob });
        }
        Ok(())
    }

    fn action_for(&self, u: f64) -> MaskAction {
        if u < self.mask_prob {
            MaskAction::Mask
        } else if u < self.mask_prob + self.random_prob {
            MaskAction::Random
        } else {
            MaskAction::KeepLabeled
        }
    }
}

/// Sub-word segmentation used to build instances.
pub trait PieceTokenizer: Send + Sync {
    fn pieces(&self, word: &str) -> Vec<String>;

    /// Rebuilds a word from its pieces.
    fn join(&self, pieces: &[String]) -> String {
        pieces.concat()
    }
}

/// Each word is a single piece.
#[derive(Clone, Copy, Debug, Default)]
pub struct WordPieces;

impl PieceTokenizer for WordPieces {
    fn pieces(&self, word: &str) -> Vec<String> {
        vec![word.to_string()]
    }
}

/// Sorted set of pieces that RANDOM replacements are drawn from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pieces: Vec<String>,
}

impl Vocabulary {
    pub fn from_sentences<'a, I>(sentences: I, tokenizer: &dyn PieceTokenizer) -> Self
    where
        I: IntoIterator<Item = &'a AnnotatedSentence>,
    {
        let set: BTreeSet<String> = sentences
            .into_iter()
            .flat_map(|s| s.tokens.surfaces().flat_map(|w| tokenizer.pieces(w)).collect::<Vec<_>>())
            .collect();
        Vocabulary { pieces: set.into_iter().collect() }
    }

    pub fn from_pieces<I: IntoIterator<Item = S>, S: Into<String>>(pieces: I) -> Self {
        let set: BTreeSet<String> = pieces.into_iter().map(Into::into).collect();
        Vocabulary { pieces: set.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Uniform draw from the vocabulary without the original piece; falls back
    /// to the original when nothing else is available.
    fn replacement(&self, original: &str, rng: &mut ChaCha8Rng) -> String {
        let excluded = self.pieces.binary_search_by(|p| p.as_str().cmp(original)).ok();
        let n = self.pieces.len() - usize::from(excluded.is_some());
        if n == 0 {
            return original.to_string();
        }
        let mut k = rng.gen_range(0..n);
        if let Some(x) = excluded {
            if k >= x {
                k += 1;
            }
        }
        self.pieces[k].clone()
    }
}

/// One pre-training record. `pieces` is the corrupted model input; `targets`
/// holds the original piece at every position whose action is not NONE.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedInstance {
    pub doc_id: String,
    pub sent_id: u64,
    pub pieces: Vec<String>,
    pub actions: Vec<MaskAction>,
    pub targets: BTreeMap<usize, String>,
    /// Word index of every piece; empty after deserialization, meaning one piece per word.
    #[serde(skip)]
    pub word_ids: Vec<usize>,
}

impl MaskedInstance {
    /// Original piece sequence, recovered by writing the targets back.
    pub fn reconstruct(&self) -> Vec<String> {
        let mut out = self.pieces.clone();
        for (&pos, piece) in &self.targets {
            if let Some(slot) = out.get_mut(pos) {
                *slot = piece.clone();
            }
        }
        out
    }

    /// Word groups as piece index ranges.
    fn word_ranges(&self) -> Vec<std::ops::Range<usize>> {
        if self.word_ids.len() != self.pieces.len() {
            return (0..self.pieces.len()).map(|i| i..i + 1).collect();
        }
        let mut out: Vec<std::ops::Range<usize>> = Vec::new();
        for (i, &w) in self.word_ids.iter().enumerate() {
            match out.last_mut() {
                Some(r) if i > 0 && self.word_ids[i - 1] == w => r.end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }

    /// Surface form with `[CUE]`/`[MASK]` literals, words separated by single spaces.
    pub fn render(&self, tokenizer: &dyn PieceTokenizer) -> String {
        self.word_ranges()
            .into_iter()
            .map(|r| {
                let masked = self.actions[r.clone()].iter().any(|a| matches!(a, MaskAction::Cue | MaskAction::Mask));
                if masked {
                    self.pieces[r].concat()
                } else {
                    tokenizer.join(&self.pieces[r])
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("masked instances always serialize")
    }
}

/// Plans masks for sentences against a fixed policy and vocabulary.
pub struct Masker<'a> {
    policy: MaskPolicy,
    vocab: &'a Vocabulary,
    tokenizer: &'a dyn PieceTokenizer,
}

impl<'a> Masker<'a> {
    pub fn new(
        policy: MaskPolicy,
        vocab: &'a Vocabulary,
        tokenizer: &'a dyn PieceTokenizer,
    ) -> Result<Self, MaskError> {
        policy.validate()?;
        Ok(Masker { policy, vocab, tokenizer })
    }

    pub fn policy(&self) -> &MaskPolicy {
        &self.policy
    }

    fn record_stream(seed: u64, sentence: &AnnotatedSentence) -> ChaCha8Rng {
        rng::stream(seed, &["mask".into(), (&sentence.meta.doc_id).into(), sentence.meta.sent_id.into()])
    }

    fn cue_words(sentence: &AnnotatedSentence) -> BTreeSet<usize> {
        sentence.cues.iter().flat_map(|c| c.token_indices.iter().copied()).collect()
    }

    /// Samples word actions from the stream keyed by `(seed, doc_id, sent_id)`.
    pub fn plan(&self, sentence: &AnnotatedSentence, seed: u64) -> MaskedInstance {
        let mut rng = Self::record_stream(seed, sentence);
        let cue_words = Self::cue_words(sentence);
        let mut word_actions = Vec::with_capacity(sentence.tokens.len());
        for i in 0..sentence.tokens.len() {
            let action = if self.policy.cue_masking && cue_words.contains(&i) {
                MaskAction::Cue
            } else if rng.gen::<f64>() < self.policy.random_rate {
                self.policy.action_for(rng.gen::<f64>())
            } else {
                MaskAction::None
            };
            word_actions.push(action);
        }
        self.build(sentence, &word_actions, &mut rng)
    }

    /// Uses the given random selection instead of sampling one. Cue words are
    /// still masked per policy; RANDOM replacements come from the keyed stream.
    pub fn plan_forced(
        &self,
        sentence: &AnnotatedSentence,
        forced: &[(usize, MaskAction)],
        seed: u64,
    ) -> Result<MaskedInstance, MaskError> {
        let n = sentence.tokens.len();
        let cue_words = Self::cue_words(sentence);
        let mut word_actions: Vec<MaskAction> = (0..n)
            .map(|i| if self.policy.cue_masking && cue_words.contains(&i) { MaskAction::Cue } else { MaskAction::None })
            .collect();
        for &(index, action) in forced {
            if index >= n {
                return Err(MaskError::ForcedOutOfRange { index, len: n });
            }
            if !action.is_selected() {
                return Err(MaskError::ForcedAction);
            }
            if word_actions[index] != MaskAction::Cue {
                word_actions[index] = action;
            }
        }
        let mut rng = Self::record_stream(seed, sentence);
        Ok(self.build(sentence, &word_actions, &mut rng))
    }

    fn build(&self, sentence: &AnnotatedSentence, word_actions: &[MaskAction], rng: &mut ChaCha8Rng) -> MaskedInstance {
        let mut inst = MaskedInstance {
            doc_id: sentence.meta.doc_id.clone(),
            sent_id: sentence.meta.sent_id,
            pieces: Vec::new(),
            actions: Vec::new(),
            targets: BTreeMap::new(),
            word_ids: Vec::new(),
        };
        for (w, (word, &action)) in sentence.tokens.surfaces().zip(word_actions).enumerate() {
            for piece in self.tokenizer.pieces(word) {
                let pos = inst.pieces.len();
                let input = match action {
                    MaskAction::None | MaskAction::KeepLabeled => piece.clone(),
                    MaskAction::Cue => CUE_TOKEN.to_string(),
                    MaskAction::Mask => MASK_TOKEN.to_string(),
                    MaskAction::Random => self.vocab.replacement(&piece, rng),
                };
                if action != MaskAction::None {
                    inst.targets.insert(pos, piece);
                }
                inst.pieces.push(input);
                inst.actions.push(action);
                inst.word_ids.push(w);
            }
        }
        inst
    }

    /// Plans every sentence (in parallel); output ordered by `(doc_id, sent_id)`.
    pub fn plan_corpus(&self, sentences: &[AnnotatedSentence], seed: u64) -> Vec<MaskedInstance> {
        let mut out: Vec<MaskedInstance> = sentences.par_iter().map(|s| self.plan(s, seed)).collect();
        out.sort_by(|a, b| (a.doc_id.as_str(), a.sent_id).cmp(&(b.doc_id.as_str(), b.sent_id)));
        out
    }
}
