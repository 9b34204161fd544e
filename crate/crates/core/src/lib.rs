//! Negation corpus engineering toolkit.
//!
//! The crate covers the full pipeline around negation cue and scope data:
//! lexicon-driven cue matching, sentence extraction and balanced sampling,
//! cue-aware masking for pre-training corpora, label codecs, a structured
//! perceptron tagger, token-level evaluation and a synthetic corpus generator.

pub mod corpus;
pub mod eval;
pub mod extract;
pub mod labelcodec;
pub mod lexicon;
pub mod mask;
pub mod rng;
pub mod synth;
pub mod tagger;
pub mod text;

pub use corpus::{read_corpus, read_corpus_file, write_corpus, CorpusError, SentenceRecord};
pub use eval::{dataset_stats, token_f1, DatasetStats, EvalMatrix, Prf};
pub use labelcodec::Task;
pub use lexicon::{match_cues, Category, CueLexicon, CueMatch};
pub use mask::{MaskPolicy, Masker, Vocabulary};
pub use synth::{generate, Grammar};
pub use tagger::{train, TaggerModel, TrainConfig};
pub use text::{tokenize, AnnotatedSentence, CueAnnotation, CueKind, ScopeAnnotation, TokenSequence};
