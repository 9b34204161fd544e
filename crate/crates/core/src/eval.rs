//! Token-level scoring and cross-dataset evaluation matrices.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::labelcodec::{task_instances, CodecError, Task, TaskInstance};
use crate::lexicon::CueLexicon;
use crate::tagger::{train, LabeledSequence, TaggerError, TaggerModel, TrainConfig};
use crate::text::AnnotatedSentence;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("sentence {sentence}: gold has {gold} label(s), prediction has {pred}")]
    LengthMismatch { sentence: usize, gold: usize, pred: usize },
    #[error("{gold} gold sequence(s) but {pred} predicted")]
    CountMismatch { gold: usize, pred: usize },
    #[error("matrix is incomplete: no value for train={train} eval={eval}")]
    Incomplete { train: String, eval: String },
    #[error("matrix line {line}: {message}")]
    MatrixFormat { line: usize, message: String },
    #[error("matrices differ in shape or dataset names")]
    ShapeMismatch,
    #[error("matrix needs at least one training and one evaluation set")]
    EmptyRegistry,
    #[error("cell train={train} eval={eval}: {source}")]
    Cell { train: String, eval: String, source: Box<EvalError> },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
}

/// Precision, recall and F1 over binarized token decisions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Precision is 1 when nothing was predicted and nothing was missed
    /// (0 otherwise); recall mirrors it; F1 is 0 when `p + r = 0`.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize, other: usize| {
            if den == 0 {
                if other == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp, fn_);
        let recall = ratio(tp, tp + fn_, fp);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Prf { tp, fp, fn_, precision, recall, f1 }
    }
}

/// Micro-averaged token F1. `include`, when given, masks out tokens per sentence.
pub fn token_f1_masked(
    gold: &[Vec<u8>],
    pred: &[Vec<u8>],
    task: Task,
    include: Option<&[Vec<bool>]>,
) -> Result<Prf, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::CountMismatch { gold: gold.len(), pred: pred.len() });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (k, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(EvalError::LengthMismatch { sentence: k, gold: g.len(), pred: p.len() });
        }
        let mask = include.and_then(|m| m.get(k));
        for (i, (&gl, &pl)) in g.iter().zip(p).enumerate() {
            if mask.is_some_and(|m| !m.get(i).copied().unwrap_or(true)) {
                continue;
            }
            match (task.is_positive(gl), task.is_positive(pl)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

pub fn token_f1(gold: &[Vec<u8>], pred: &[Vec<u8>], task: Task) -> Result<Prf, EvalError> {
    token_f1_masked(gold, pred, task, None)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub n_sentences: usize,
    pub n_negations: usize,
    pub n_unique_cues: usize,
}

pub fn dataset_stats(corpus: &[AnnotatedSentence]) -> DatasetStats {
    let mut unique = BTreeSet::new();
    let mut n_negations = 0;
    for s in corpus {
        for c in &s.cues {
            n_negations += 1;
            unique.insert(c.surface(&s.tokens));
        }
    }
    DatasetStats { n_sentences: corpus.len(), n_negations, n_unique_cues: unique.len() }
}

/// F1 scores in percent; rows are evaluation sets, columns training sets.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalMatrix {
    pub train_sets: Vec<String>,
    pub eval_sets: Vec<String>,
    /// `cells[row][col]` for eval set `row`, train set `col`.
    pub cells: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    /// Mean of the cells whose train and eval set coincide.
    pub same_dataset_mean: Option<f64>,
    /// Mean of every other cell.
    pub cross_dataset_mean: Option<f64>,
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn fmt_opt(x: Option<f64>, signed: bool) -> String {
    match x {
        None => "NA".into(),
        Some(v) if signed => format!("{:+.2}", round2(v)),
        Some(v) => format!("{:.2}", round2(v)),
    }
}

impl Aggregate {
    /// `same=90.55 cross=69.61`
    pub fn summary(&self) -> String {
        format!("same={} cross={}", fmt_opt(self.same_dataset_mean, false), fmt_opt(self.cross_dataset_mean, false))
    }

    pub fn delta_summary(&self) -> String {
        format!("same={} cross={}", fmt_opt(self.same_dataset_mean, true), fmt_opt(self.cross_dataset_mean, true))
    }
}

const CORNER: &str = "eval\\train";

impl EvalMatrix {
    pub fn new(train_sets: Vec<String>, eval_sets: Vec<String>) -> Self {
        let cells = vec![vec![None; train_sets.len()]; eval_sets.len()];
        EvalMatrix { train_sets, eval_sets, cells }
    }

    pub fn get(&self, train: &str, eval: &str) -> Option<f64> {
        let c = self.train_sets.iter().position(|t| t == train)?;
        let r = self.eval_sets.iter().position(|e| e == eval)?;
        self.cells[r][c]
    }

    pub fn set(&mut self, train: &str, eval: &str, value: f64) {
        let c = self.train_sets.iter().position(|t| t == train).expect("known train set");
        let r = self.eval_sets.iter().position(|e| e == eval).expect("known eval set");
        self.cells[r][c] = Some(value);
    }

    fn check_complete(&self) -> Result<(), EvalError> {
        for (r, row) in self.cells.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    return Err(EvalError::Incomplete {
                        train: self.train_sets[c].clone(),
                        eval: self.eval_sets[r].clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Diagonal (same-name) and off-diagonal means.
    pub fn aggregate(&self) -> Result<Aggregate, EvalError> {
        self.check_complete()?;
        let (mut same, mut cross) = (Vec::new(), Vec::new());
        for (r, row) in self.cells.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let v = cell.expect("checked complete");
                if self.train_sets[c] == self.eval_sets[r] {
                    same.push(v);
                } else {
                    cross.push(v);
                }
            }
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Ok(Aggregate { same_dataset_mean: mean(&same), cross_dataset_mean: mean(&cross) })
    }

    /// Cell-wise `self - baseline`.
    pub fn delta(&self, baseline: &EvalMatrix) -> Result<EvalMatrix, EvalError> {
        if self.train_sets != baseline.train_sets || self.eval_sets != baseline.eval_sets {
            return Err(EvalError::ShapeMismatch);
        }
        self.check_complete()?;
        baseline.check_complete()?;
        let cells = self
            .cells
            .iter()
            .zip(&baseline.cells)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Some(x.unwrap() - y.unwrap())).collect())
            .collect();
        Ok(EvalMatrix { train_sets: self.train_sets.clone(), eval_sets: self.eval_sets.clone(), cells })
    }

    /// Parses the TSV report: a header `eval\train<TAB>train names...`, then one
    /// row per evaluation set. Values may carry a sign (`+0.78`); `NA` or an
    /// empty field marks a missing cell. `#` lines are comments.
    pub fn from_tsv(text: &str) -> Result<Self, EvalError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) =
            lines.next().ok_or(EvalError::MatrixFormat { line: 1, message: "missing header row".into() })?;
        let train_sets: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
        if train_sets.is_empty() {
            return Err(EvalError::MatrixFormat { line: hline, message: "header names no training sets".into() });
        }
        let mut eval_sets = Vec::new();
        let mut cells = Vec::new();
        for (line, row) in lines {
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() != train_sets.len() + 1 {
                return Err(EvalError::MatrixFormat {
                    line,
                    message: format!("expected {} fields, found {}", train_sets.len() + 1, fields.len()),
                });
            }
            eval_sets.push(fields[0].trim().to_string());
            let row_cells = fields[1..]
                .iter()
                .map(|f| {
                    let f = f.trim();
                    if f.is_empty() || f.eq_ignore_ascii_case("na") {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .map(Some)
                            .ok_or_else(|| EvalError::MatrixFormat { line, message: format!("bad number {f:?}") })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            cells.push(row_cells);
        }
        if eval_sets.is_empty() {
            return Err(EvalError::MatrixFormat { line: hline, message: "no evaluation rows".into() });
        }
        Ok(EvalMatrix { train_sets, eval_sets, cells })
    }

    fn cell_text(&self, r: usize, c: usize, signed: bool) -> String {
        fmt_opt(self.cells[r][c], signed)
    }

    /// Machine-readable report; `signed` prints values as `+x.xx`.
    pub fn to_tsv(&self, signed: bool) -> String {
        let mut out = String::new();
        out.push_str(CORNER);
        for t in &self.train_sets {
            out.push('\t');
            out.push_str(t);
        }
        out.push('\n');
        for (r, e) in self.eval_sets.iter().enumerate() {
            out.push_str(e);
            for c in 0..self.train_sets.len() {
                out.push('\t');
                out.push_str(&self.cell_text(r, c, signed));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned grid for people; same-dataset cells are bracketed.
    pub fn to_pretty(&self, signed: bool) -> String {
        let mut rows: Vec<Vec<String>> =
            vec![std::iter::once(CORNER.to_string()).chain(self.train_sets.iter().cloned()).collect()];
        for (r, e) in self.eval_sets.iter().enumerate() {
            let mut row = vec![e.clone()];
            for c in 0..self.train_sets.len() {
                let v = self.cell_text(r, c, signed);
                row.push(if self.train_sets[c] == *e { format!("[{v}]") } else { v });
            }
            rows.push(row);
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(
                    |(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) },
                )
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

/// A named corpus with its training and test portions.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub name: String,
    pub train: Vec<AnnotatedSentence>,
    pub test: Vec<AnnotatedSentence>,
}

#[derive(Clone, Debug)]
pub struct MatrixConfig {
    pub task: Task,
    pub epochs: usize,
    /// One model per seed; cells average over them.
    pub seeds: Vec<u64>,
    pub lexicon: Option<CueLexicon>,
    pub ignore_punct: bool,
}

fn labeled(instances: &[TaskInstance]) -> Vec<LabeledSequence> {
    instances.iter().map(|i| LabeledSequence { tokens: i.input.clone(), labels: i.labels.clone() }).collect()
}

/// Scores `model` on `corpus`, projecting scope predictions back onto the original tokens.
pub fn evaluate(model: &TaggerModel, corpus: &[AnnotatedSentence], ignore_punct: bool) -> Result<Prf, EvalError> {
    let instances = task_instances(corpus, model.task)?;
    let mut gold = Vec::with_capacity(instances.len());
    let mut pred = Vec::with_capacity(instances.len());
    let mut include = Vec::with_capacity(instances.len());
    for inst in &instances {
        gold.push(inst.gold());
        pred.push(inst.project(&model.predict(&inst.input)));
        include.push(corpus[inst.sentence].tokens.tokens().iter().map(|t| !(ignore_punct && t.is_punct())).collect());
    }
    token_f1_masked(&gold, &pred, model.task, Some(&include))
}

/// Trains one model per (training set, seed) and scores every evaluation set.
/// Cells hold the seed-averaged F1 in percent.
pub fn cross_matrix(registry: &[DatasetSplit], config: &MatrixConfig) -> Result<EvalMatrix, EvalError> {
    if registry.is_empty() || config.seeds.is_empty() {
        return Err(EvalError::EmptyRegistry);
    }
    let names: Vec<String> = registry.iter().map(|d| d.name.clone()).collect();
    let jobs: Vec<(usize, u64)> = (0..registry.len()).flat_map(|t| config.seeds.iter().map(move |&s| (t, s))).collect();
    let scored: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(t, seed)| {
            let train_set = &registry[t];
            let wrap = |eval: &str, e: EvalError| EvalError::Cell {
                train: train_set.name.clone(),
                eval: eval.to_string(),
                source: Box::new(e),
            };
            let instances =
                task_instances(&train_set.train, config.task).map_err(|e| wrap(&train_set.name, e.into()))?;
            let cfg = TrainConfig { epochs: config.epochs, seed, lexicon: config.lexicon.clone() };
            let model = train(&labeled(&instances), config.task, &cfg).map_err(|e| wrap(&train_set.name, e.into()))?;
            registry
                .iter()
                .map(|ev| {
                    evaluate(&model, &ev.test, config.ignore_punct).map(|p| p.f1 * 100.0).map_err(|e| wrap(&ev.name, e))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut m = EvalMatrix::new(names.clone(), names);
    let k = config.seeds.len() as f64;
    for (t, runs) in scored.chunks(config.seeds.len()).enumerate() {
        for (e, row) in m.cells.iter_mut().enumerate() {
            row[t] = Some(runs.iter().map(|r| r[e]).sum::<f64>() / k);
        }
    }
    Ok(m)
}
