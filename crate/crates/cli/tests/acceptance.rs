//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the report is always shown.
//! Set `NEGKIT_BIOSCOPE_ABSTRACT` to a converted BioScope-Abstract corpus to
//! enable the full-corpus half of criterion 10.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use negkit::corpus::parse_line;
use negkit::eval::{round2, token_f1, EvalMatrix};
use negkit::labelcodec::{decode_cue, decode_scope, encode_cue, encode_scope, Task};
use negkit::lexicon::{match_cues, negating_cues, CueLexicon};
use negkit::mask::{MaskAction, MaskPolicy, Masker, Vocabulary, WordPieces};
use negkit::synth::{generate, Grammar};
use negkit::text::{tokenize, AnnotatedSentence, CueAnnotation, SentenceMeta};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn negkit(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("negkit").chain(args.iter().copied());
    let code = negkit_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn negkit_ok(args: &[&str]) -> Result<String, String> {
    let (code, out, err) = negkit(args);
    ensure!(code == 0, "`negkit {}` exited {code}: {err}", args.join(" "));
    Ok(out)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cue = negkit_ok(&["aggregate", path_str(&data("fixtures/cue_negbert.tsv"))])?;
    let scope = negkit_ok(&["aggregate", path_str(&data("fixtures/scope_negbert.tsv"))])?;
    let elapsed = start.elapsed();
    ensure!(cue.trim() == "same=90.55 cross=69.61", "cue grid gave {cue:?}");
    ensure!(scope.trim() == "same=90.56 cross=73.41", "scope grid gave {scope:?}");
    let read = |f: &str| EvalMatrix::from_tsv(&std::fs::read_to_string(data(f)).unwrap()).unwrap().aggregate().unwrap();
    for (agg, same, cross) in
        [(read("fixtures/cue_negbert.tsv"), 90.55, 69.61), (read("fixtures/scope_negbert.tsv"), 90.56, 73.41)]
    {
        ensure!((agg.same_dataset_mean.unwrap() - same).abs() <= 0.01, "same mean off");
        ensure!((agg.cross_dataset_mean.unwrap() - cross).abs() <= 0.01, "cross mean off");
    }
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("cue {} / scope {} in {elapsed:.0?}", cue.trim(), scope.trim()))
}

fn criterion_2() -> Outcome {
    let tokens = tokenize("No serious complications such as hypertension, diabetes.");
    let s = AnnotatedSentence {
        cues: vec![CueAnnotation::normal(&tokens, 0)],
        scopes: vec![],
        tokens,
        meta: SentenceMeta { doc_id: "example".into(), sent_id: 0, corpus: "example".into() },
    };
    let hypertension = s.tokens.surfaces().position(|w| w == "hypertension").unwrap();
    let vocab = Vocabulary::from_sentences([&s], &WordPieces);
    let masker = Masker::new(MaskPolicy::default(), &vocab, &WordPieces).map_err(|e| e.to_string())?;
    let inst = masker.plan_forced(&s, &[(hypertension, MaskAction::Mask)], 0).map_err(|e| e.to_string())?;
    let rendered = inst.render(&WordPieces);
    ensure!(rendered == "[CUE] serious complications such as [MASK] , diabetes .", "rendered {rendered:?}");
    Ok(rendered)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let corpus = generate(&Grammar::preset("clinical").unwrap(), 4000, 31).map_err(|e| e.to_string())?;
    let vocab = Vocabulary::from_sentences(&corpus, &WordPieces);
    let masker = Masker::new(MaskPolicy::default(), &vocab, &WordPieces).map_err(|e| e.to_string())?;
    let mut eligible = 0usize;
    let mut counts: BTreeMap<MaskAction, usize> = BTreeMap::new();
    for (inst, s) in masker.plan_corpus(&corpus, 99).iter().zip(&corpus) {
        let cue_tokens: Vec<usize> = s.cues.iter().flat_map(|c| c.token_indices.clone()).collect();
        for (i, a) in inst.actions.iter().enumerate() {
            if cue_tokens.contains(&i) {
                ensure!(*a == MaskAction::Cue, "cue word {i} got {a:?}");
                continue;
            }
            ensure!(*a != MaskAction::Cue, "non-cue word marked as cue");
            eligible += 1;
            *counts.entry(*a).or_default() += 1;
        }
    }
    let selected = eligible - counts.get(&MaskAction::None).copied().unwrap_or(0);
    let rate = selected as f64 / eligible as f64;
    ensure!(eligible >= 10_000, "only {eligible} eligible words");
    ensure!((rate - 0.15).abs() <= 0.01, "selected fraction {rate:.4}");
    let share = |a| counts.get(&a).copied().unwrap_or(0) as f64 / selected as f64;
    let split = [share(MaskAction::Mask), share(MaskAction::Random), share(MaskAction::KeepLabeled)];
    for (got, want) in split.iter().zip([0.8, 0.1, 0.1]) {
        ensure!((got - want).abs() <= 0.02, "split {split:.3?}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{eligible} eligible, rate {rate:.4}, split {split:.3?}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut total_matches = 0;
    for case in 0..1000 {
        let lex = CueLexicon::new(oracles::random_lexicon(&mut rng)).with_affix_min_remainder(rng.gen_range(0..5));
        let tokens = oracles::random_words(&mut rng);
        let got: Vec<oracles::OracleMatch> =
            match_cues(&tokens, &lex).into_iter().map(|m| (m.token_indices, m.char_span, m.category)).collect();
        let want = oracles::match_oracle(&tokens, lex.entries(), lex.affix_min_remainder());
        ensure!(got == want, "case {case}: {:?}\n matcher {got:?}\n oracle  {want:?}", tokens.text());
        total_matches += got.len();
    }
    Ok(format!("1000/1000 sentences agree ({total_matches} matches)"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut scopes = 0;
    for case in 0..1000 {
        let s = oracles::random_annotation(&mut rng);
        ensure!(s.validate().is_empty(), "case {case}: generator produced an invalid annotation");
        let labels = encode_cue(&s).map_err(|e| e.to_string())?;
        let decoded = decode_cue(&labels, &s.tokens).map_err(|e| e.to_string())?;
        ensure!(decoded.cues == oracles::decodable_cues(&s), "case {case}: cue round trip failed");
        for k in 0..s.cues.len() {
            if let Some(gold) = s.scope_of(k) {
                let inst = encode_scope(&s, k).map_err(|e| e.to_string())?;
                ensure!(inst.project(&inst.marked_labels()) == inst.labels.labels, "case {case}: projection");
                ensure!(decode_scope(&inst.labels, k).scope.token_indices == gold, "case {case}: scope round trip");
                scopes += 1;
            }
        }
    }
    Ok(format!("1000/1000 cue sequences, {scopes} scope instances round-trip"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..1000 {
        let task = if rng.gen_bool(0.5) { Task::Cue } else { Task::Scope };
        let n_seq = rng.gen_range(1..6);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..n_seq {
            let len = rng.gen_range(1..15);
            let hi = task.n_labels() as u8;
            gold.push((0..len).map(|_| rng.gen_range(0..hi)).collect::<Vec<u8>>());
            pred.push((0..len).map(|_| rng.gen_range(0..hi)).collect::<Vec<u8>>());
        }
        let prf = token_f1(&gold, &pred, task).map_err(|e| e.to_string())?;
        let counts = oracles::confusion_oracle(&gold, &pred, task);
        ensure!(
            (prf.tp, prf.fp, prf.fn_) == counts,
            "case {case}: {:?} vs oracle {counts:?}",
            (prf.tp, prf.fp, prf.fn_)
        );
        let (tp, fp, fn_) = counts;
        let p = if tp + fp == 0 {
            if fn_ == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            if fp == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        ensure!((prf.f1 - f).abs() < 1e-12, "case {case}: f1 {} vs {f}", prf.f1);
    }
    let gold = vec![vec![1, 3, 2, 2, 0]];
    ensure!(token_f1(&gold, &gold, Task::Cue).unwrap().f1 == 1.0, "perfect prediction");
    let disjoint = vec![vec![3, 1, 3, 3, 3]];
    ensure!(token_f1(&gold, &disjoint, Task::Cue).unwrap().f1 == 0.0, "disjoint prediction");
    Ok("1000/1000 exact; perfect = 1.0; disjoint = 0.0".into())
}

fn write_synthetic(dir: &Path, preset: &str, seed: u64) -> Result<(PathBuf, PathBuf), String> {
    let text = negkit_ok(&["synth", "--preset", preset, "--n", "2000", "--seed", &seed.to_string()])?;
    let lines: Vec<&str> = text.lines().collect();
    ensure!(lines.len() == 2000, "{preset}: {} lines", lines.len());
    let train = dir.join(format!("{preset}.train.jsonl"));
    let test = dir.join(format!("{preset}.test.jsonl"));
    std::fs::write(&train, lines[..1600].join("\n") + "\n").unwrap();
    std::fs::write(&test, lines[1600..].join("\n") + "\n").unwrap();
    Ok((train, test))
}

fn dataset_args(dir: &Path) -> Result<Vec<String>, String> {
    let mut args = Vec::new();
    for (preset, seed) in [("clinical", 70), ("review", 71)] {
        let (train, test) = write_synthetic(dir, preset, seed)?;
        args.push("--dataset".to_string());
        args.push(format!("{preset}={},{}", train.display(), test.display()));
    }
    Ok(args)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut args: Vec<String> = ["matrix", "--task", "cue", "--epochs", "5", "--seed", "7"].map(String::from).to_vec();
    args.extend(dataset_args(dir.path())?);
    let out = negkit_ok(&args.iter().map(String::as_str).collect::<Vec<_>>())?;
    let m = EvalMatrix::from_tsv(&out).map_err(|e| e.to_string())?;
    let mut worst_gap = f64::INFINITY;
    for name in ["clinical", "review"] {
        let other = if name == "clinical" { "review" } else { "clinical" };
        let same = m.get(name, name).unwrap();
        let cross = m.get(other, name).unwrap();
        ensure!(same >= 95.0, "{name} same-dataset F1 {same:.2}");
        worst_gap = worst_gap.min(same - cross);
    }
    let agg = m.aggregate().map_err(|e| e.to_string())?;
    ensure!(worst_gap >= 10.0, "cross-dataset gap only {worst_gap:.2} points");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{} (F1 %), smallest gap {:.2} points, {elapsed:.1?}", agg.summary(), round2(worst_gap)))
}

const SOURCE_A: &[&str] = &[
    "The patient denies chest pain.",
    "No fever was recorded overnight.",
    "There was no increase in lesion size.",
    "Blood pressure remained stable.",
    "The rash is not itchy.",
    "Gram negative rods were cultured.",
    "Abdomen soft without tenderness.",
    "Heart sounds normal.",
    "Dr. Smith ruled out fracture on review.",
    "Appetite good and eating well.",
];

const SOURCE_B: &[&str] = &[
    "I would never buy this again.",
    "The plot was engaging from start to finish.",
    "Not only cheap but also sturdy.",
    "The battery does not last a day.",
    "Great sound and a solid build.",
    "Nothing about the service impressed me.",
    "Shipping was fast.",
    "The screen is bright and clear.",
];

fn write_documents(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (sub, pool, n_docs) in [("a", SOURCE_A, 12), ("b", SOURCE_B, 9)] {
        std::fs::create_dir_all(dir.join(sub)).unwrap();
        for d in 0..n_docs {
            let k = rng.gen_range(3..9);
            let text: Vec<&str> = (0..k).map(|_| *pool.choose(&mut rng).unwrap()).collect();
            std::fs::write(dir.join(sub).join(format!("doc{d:02}.txt")), text.join(" ")).unwrap();
        }
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let docs = dir.path().join("docs");
    write_documents(&docs);
    let lex = CueLexicon::bundled();
    let all = negkit_ok(&["extract", path_str(&docs)])?;
    let sampled = negkit_ok(&["extract", path_str(&docs), "--n-total", "41", "--seed", "3"])?;
    let mut checked = 0;
    for line in all.lines().chain(sampled.lines()) {
        let s = parse_line(line, 0).map_err(|e| e.to_string())?;
        ensure!(!negating_cues(&s.tokens, &lex).is_empty(), "no negating cue in {:?}", s.tokens.text());
        checked += 1;
    }
    let mut per_source: BTreeMap<String, usize> = BTreeMap::new();
    for line in sampled.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        *per_source.entry(v["source"].as_str().unwrap_or("?").to_string()).or_default() += 1;
    }
    let a = per_source.get("a").copied().unwrap_or(0);
    let b = per_source.get("b").copied().unwrap_or(0);
    ensure!(a + b > 0 && a.abs_diff(b) <= 1, "balanced sample has a={a} b={b}");
    Ok(format!("{checked} retained sentences re-match; sample a={a} b={b}"))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let docs = root.join("docs");
    write_documents(&docs);
    let datasets = dataset_args(root)?;
    let corpus = root.join("clinical.train.jsonl");
    let run = |threads: &str| -> Result<Vec<Vec<u8>>, String> {
        let out = |name: &str| root.join(format!("{name}.{threads}"));
        negkit_ok(&[
            "--threads",
            threads,
            "extract",
            path_str(&docs),
            "--n-total",
            "30",
            "--seed",
            "5",
            "--out",
            path_str(&out("extract")),
        ])?;
        negkit_ok(&["--threads", threads, "mask", path_str(&corpus), "--seed", "5", "--out", path_str(&out("mask"))])?;
        negkit_ok(&[
            "--threads",
            threads,
            "train",
            path_str(&corpus),
            "--task",
            "scope",
            "--epochs",
            "2",
            "--seed",
            "5",
            "--out",
            path_str(&out("model")),
        ])?;
        let mut args = vec!["--threads", threads, "matrix", "--epochs", "2", "--seed", "5", "--seeds", "2", "--out"];
        let matrix_out = out("matrix");
        args.push(path_str(&matrix_out));
        args.extend(datasets.iter().map(String::as_str));
        negkit_ok(&args)?;
        Ok(["extract", "mask", "model", "matrix"].iter().map(|n| std::fs::read(out(n)).unwrap()).collect())
    };
    let one = run("1")?;
    let eight = run("8")?;
    for (name, (x, y)) in ["extract", "mask", "train", "matrix"].iter().zip(one.iter().zip(&eight)) {
        ensure!(!x.is_empty(), "{name} produced no output");
        ensure!(x == y, "{name} output differs between --threads 1 and 8");
    }
    Ok("extract, mask, train, matrix byte-identical at --threads 1 and 8".into())
}

fn criterion_10() -> Outcome {
    let out = negkit_ok(&["stats", path_str(&data("fixtures/stats_fixture.jsonl"))])?;
    ensure!(out.trim() == "10\t4\t3", "fixture stats {out:?}");
    let bioscope = match std::env::var_os("NEGKIT_BIOSCOPE_ABSTRACT") {
        Some(path) => {
            let path = PathBuf::from(path);
            let out = negkit_ok(&["stats", path_str(&path)])?;
            ensure!(out.trim() == "11871\t1719\t28", "BioScope-Abstract stats {out:?}");
            "BioScope-Abstract (11871, 1719, 28)"
        }
        None => "BioScope-Abstract skipped (NEGKIT_BIOSCOPE_ABSTRACT unset)",
    };
    Ok(format!("fixture (10, 4, 3); {bioscope}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("aggregate reproduces the reported same/cross means", criterion_1),
        ("masking worked example renders exactly", criterion_2),
        ("mask selection rate and action split", criterion_3),
        ("lexicon matcher equals brute-force oracle", criterion_4),
        ("cue and scope codecs round-trip", criterion_5),
        ("token F1 equals confusion-count oracle", criterion_6),
        ("synthetic corpora show a cross-dataset transfer gap", criterion_7),
        ("extraction keeps only negation sentences, balanced", criterion_8),
        ("seeded outputs independent of thread count", criterion_9),
        ("fixture statistics", criterion_10),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
