#[path = "support/oracles.rs"]
mod oracles;

use negkit::eval::{token_f1, EvalMatrix};
use negkit::labelcodec::{decode_cue, decode_scope, encode_cue, encode_scope, Task};
use negkit::lexicon::{match_cues, CueLexicon};
use negkit::synth::{generate, Grammar};
use negkit::tagger::{train, LabeledSequence, TrainConfig};
use negkit::text::{fold, tokenize};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tokens_reproduce_their_text(text in "[a-zA-Z' .,;:!?()\"0-9-]{0,60}") {
        let seq = tokenize(&text);
        let chars: Vec<char> = text.chars().collect();
        for t in seq.tokens() {
            let slice: String = chars[t.start..t.end].iter().collect();
            prop_assert_eq!(&slice, &t.surface);
            prop_assert!(!t.surface.chars().any(char::is_whitespace));
        }
        let squeezed: String = text.split_whitespace().collect();
        prop_assert_eq!(seq.surfaces().collect::<String>(), squeezed);
    }

    #[test]
    fn tokenizing_joined_tokens_is_idempotent(text in "[a-zA-Z' .,;!?()]{0,60}") {
        let once = tokenize(&text);
        let twice = tokenize(&once.joined());
        prop_assert_eq!(once.surfaces().collect::<Vec<_>>(), twice.surfaces().collect::<Vec<_>>());
    }

    #[test]
    fn matcher_agrees_with_oracle(seed in any::<u64>(), min_rem in 0usize..5) {
        let mut rng = seeded(seed);
        let lex = CueLexicon::new(oracles::random_lexicon(&mut rng)).with_affix_min_remainder(min_rem);
        let tokens = oracles::random_words(&mut rng);
        let got: Vec<oracles::OracleMatch> =
            match_cues(&tokens, &lex).into_iter().map(|m| (m.token_indices, m.char_span, m.category)).collect();
        prop_assert_eq!(got, oracles::match_oracle(&tokens, lex.entries(), min_rem));
    }

    #[test]
    fn cue_codec_round_trips(seed in any::<u64>()) {
        let s = oracles::random_annotation(&mut seeded(seed));
        prop_assert!(s.validate().is_empty());
        let decoded = decode_cue(&encode_cue(&s).unwrap(), &s.tokens).unwrap();
        prop_assert!(decoded.warnings.is_empty());
        prop_assert_eq!(decoded.cues, oracles::decodable_cues(&s));
    }

    #[test]
    fn scope_codec_round_trips(seed in any::<u64>()) {
        let s = oracles::random_annotation(&mut seeded(seed));
        for k in 0..s.cues.len() {
            match s.scope_of(k) {
                Some(scope) => {
                    let inst = encode_scope(&s, k).unwrap();
                    prop_assert_eq!(inst.project(&inst.marked_labels()), inst.labels.labels.clone());
                    let back = decode_scope(&inst.labels, k);
                    prop_assert_eq!(back.scope.token_indices, scope);
                    prop_assert!(back.warning.is_none());
                }
                None => prop_assert!(encode_scope(&s, k).is_err()),
            }
        }
    }

    #[test]
    fn f1_agrees_with_confusion_oracle(
        pairs in prop::collection::vec(
            (1usize..12).prop_flat_map(|n| (prop::collection::vec(0u8..4, n), prop::collection::vec(0u8..4, n))),
            0..8,
        ),
        scope in any::<bool>(),
    ) {
        let task = if scope { Task::Scope } else { Task::Cue };
        let clamp = |v: &Vec<u8>| v.iter().map(|&l| if scope { l % 2 } else { l }).collect::<Vec<u8>>();
        let gold: Vec<Vec<u8>> = pairs.iter().map(|p| clamp(&p.0)).collect();
        let pred: Vec<Vec<u8>> = pairs.iter().map(|p| clamp(&p.1)).collect();
        let prf = token_f1(&gold, &pred, task).unwrap();
        let (tp, fp, fn_) = oracles::confusion_oracle(&gold, &pred, task);
        prop_assert_eq!((prf.tp, prf.fp, prf.fn_), (tp, fp, fn_));
        prop_assert!((0.0..=1.0).contains(&prf.f1));
        let binarized_equal = gold.iter().zip(&pred).all(|(g, p)| {
            g.iter().zip(p).all(|(&a, &b)| task.is_positive(a) == task.is_positive(b))
        });
        prop_assert_eq!(prf.f1 == 1.0, binarized_equal);
    }

    #[test]
    fn aggregate_matches_hand_means(values in prop::collection::vec(0.0f64..100.0, 9)) {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut m = EvalMatrix::new(names.clone(), names.clone());
        for (k, v) in values.iter().enumerate() {
            m.cells[k / 3][k % 3] = Some(*v);
        }
        let agg = m.aggregate().unwrap();
        let diag = (values[0] + values[4] + values[8]) / 3.0;
        let off = (values.iter().sum::<f64>() - 3.0 * diag) / 6.0;
        prop_assert!((agg.same_dataset_mean.unwrap() - diag).abs() < 0.005);
        prop_assert!((agg.cross_dataset_mean.unwrap() - off).abs() < 0.005);
    }
}

#[test]
fn scaling_weights_keeps_predictions() {
    let grammar = Grammar::preset("clinical").unwrap();
    let corpus = generate(&grammar, 300, 4).unwrap();
    let seqs: Vec<LabeledSequence> = corpus
        .iter()
        .map(|s| LabeledSequence { tokens: s.tokens.clone(), labels: encode_cue(s).unwrap().ids() })
        .collect();
    let model = train(&seqs, Task::Cue, &TrainConfig { epochs: 2, seed: 1, lexicon: None }).unwrap();
    for factor in [0.5, 3.0, 1000.0] {
        let scaled = model.scaled(factor);
        for s in &corpus[..100] {
            assert_eq!(model.predict(&s.tokens), scaled.predict(&s.tokens));
        }
    }
}

#[test]
fn synthetic_scopes_follow_their_rules() {
    for name in Grammar::preset_names() {
        let grammar = Grammar::preset(name).unwrap();
        for s in generate(&grammar, 500, 21).unwrap() {
            assert!(s.validate().is_empty(), "{:?}", s.validate());
            for (k, cue) in s.cues.iter().enumerate() {
                let surface = cue.surface(&s.tokens);
                let rule = grammar
                    .cues
                    .iter()
                    .find(|r| r.words.iter().map(|w| fold(w)).collect::<Vec<_>>().join(" ") == surface)
                    .expect("cue comes from a rule")
                    .scope;
                let expected = oracles::scope_rule_oracle(&s, cue, rule);
                assert_eq!(s.scope_of(k).unwrap_or_default(), expected, "{}", s.tokens.text());
            }
        }
    }
}

#[test]
fn negation_density_is_respected() {
    for name in Grammar::preset_names() {
        let corpus = generate(&Grammar::preset(name).unwrap(), 1000, 8).unwrap();
        let share = corpus.iter().filter(|s| !s.cues.is_empty()).count() as f64 / 1000.0;
        assert!((share - 0.6).abs() <= 0.05, "{name}: {share}");
    }
}

#[test]
fn synthetic_corpus_survives_serialization() {
    let corpus = generate(&Grammar::preset("review").unwrap(), 100, 2).unwrap();
    let mut buf = Vec::new();
    negkit::write_corpus(&mut buf, &corpus).unwrap();
    assert_eq!(negkit::read_corpus(buf.as_slice()).unwrap(), corpus);
}
