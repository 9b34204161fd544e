//! The `negkit` command line: argument definitions and command implementations.
//!
//! [`run`] never exits the process; it returns the exit code so that tests can
//! drive the binary logic in-process. Exit codes: 0 success, 1 usage error,
//! 2 data error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use negkit::corpus::{read_corpus_file, record_line, to_line, write_corpus};
use negkit::eval::{cross_matrix, dataset_stats, evaluate, DatasetSplit, EvalMatrix, MatrixConfig};
use negkit::extract::{balanced_sample, extract_documents, load_documents, RuleSegmenter, Source};
use negkit::labelcodec::{decode_cue, scope_instances, task_instances, to_conll, CueLabelSeq, Task};
use negkit::lexicon::{merge, CueLexicon};
use negkit::mask::{MaskPolicy, Masker, Vocabulary, WordPieces};
use negkit::synth::{generate, Grammar};
use negkit::tagger::{train, LabeledSequence, TaggerModel, TrainConfig};
use negkit::text::{AnnotatedSentence, ScopeAnnotation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "negkit", version, about = "Negation corpus toolkit: extraction, masking, tagging and evaluation")]
pub struct Cli {
    /// Worker threads for parallel steps (default: all cores). Output does not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus size and negation counts per file
    Stats(StatsArgs),
    /// Collect negation sentences from raw documents, optionally balanced across sources
    Extract(ExtractArgs),
    /// Build a cue-masked pre-training corpus
    Mask(MaskArgs),
    /// Encode annotations as cue or scope label sequences
    Encode(EncodeArgs),
    /// Train a perceptron tagger
    Train(TrainArgs),
    /// Tag a corpus with a trained model
    Predict(PredictArgs),
    /// Token-level precision, recall and F1 of a model on a gold corpus
    Eval(EvalArgs),
    /// Train on every dataset and evaluate on all of them
    Matrix(MatrixArgs),
    /// Same-dataset and cross-dataset means of an evaluation matrix
    Aggregate(AggregateArgs),
    /// Generate a synthetic annotated corpus from a grammar
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Cue,
    Scope,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Cue => Task::Cue,
            TaskArg::Scope => Task::Scope,
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus files (JSON lines)
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Print an aligned table with a header and file names
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory with `a/` and `b/` subdirectories, one plain-text document per file
    pub input: PathBuf,
    /// Extra lexicon TSV merged into the bundled lexicons (repeatable)
    #[arg(long, value_name = "PATH")]
    pub lexicon: Vec<PathBuf>,
    /// Draw a balanced sample of this many sentences
    #[arg(long, value_name = "N")]
    pub n_total: Option<usize>,
    /// Seed for the balanced sample (required with --n-total)
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Fail instead of shrinking the sample when a source runs short
    #[arg(long)]
    pub strict: bool,
    /// Corpus name written into every record
    #[arg(long, default_value = "extracted")]
    pub corpus: String,
    /// Output file (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Corpus file (JSON lines)
    pub input: PathBuf,
    /// Seed for random selection (required unless --rate is 0)
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Share of non-cue words selected for masking
    #[arg(long, value_name = "F", default_value_t = 0.15)]
    pub rate: f64,
    /// Leave cue words untouched and eligible for random selection
    #[arg(long)]
    pub no_cue_mask: bool,
    /// Print rendered text lines instead of JSON records
    #[arg(long)]
    pub render: bool,
    /// Output file (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Corpus file (JSON lines)
    pub input: PathBuf,
    /// Label scheme to emit
    #[arg(long, value_enum, default_value = "cue")]
    pub task: TaskArg,
    /// Emit CoNLL-style columns (token, cue label, one scope column per cue) instead of JSON
    #[arg(long)]
    pub conll: bool,
    /// Output file (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus (JSON lines)
    pub input: PathBuf,
    /// Labeling task
    #[arg(long, value_enum, default_value = "cue")]
    pub task: TaskArg,
    /// Training passes over the data
    #[arg(long, value_name = "N", default_value_t = 5)]
    pub epochs: usize,
    /// Seed for the per-epoch shuffle
    #[arg(long, value_name = "N")]
    pub seed: u64,
    /// Lexicon TSV whose categories become tagger features
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    /// Model output file
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Corpus file (JSON lines); scope prediction conditions on its cues
    pub input: PathBuf,
    /// Model file written by `train`
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Output file (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold corpus file (JSON lines)
    pub input: PathBuf,
    /// Model file written by `train`
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Leave punctuation tokens out of the counts
    #[arg(long)]
    pub ignore_punct: bool,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Datasets as NAME=TRAIN.jsonl,TEST.jsonl (repeatable, at least one)
    #[arg(long = "dataset", value_name = "SPEC", required = true)]
    pub datasets: Vec<String>,
    /// Labeling task
    #[arg(long, value_enum, default_value = "cue")]
    pub task: TaskArg,
    /// Training passes per model
    #[arg(long, value_name = "N", default_value_t = 5)]
    pub epochs: usize,
    /// Base seed; models use seeds N, N+1, ...
    #[arg(long, value_name = "N")]
    pub seed: u64,
    /// Models per training set; cells average over them
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub seeds: usize,
    /// Lexicon TSV whose categories become tagger features
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    /// Leave punctuation tokens out of the counts
    #[arg(long)]
    pub ignore_punct: bool,
    /// Print an aligned grid instead of TSV
    #[arg(long)]
    pub pretty: bool,
    /// Output file (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Matrix TSV (eval sets as rows, train sets as columns)
    pub matrix: PathBuf,
    /// Report the matrix relative to this baseline matrix
    #[arg(long, value_name = "PATH")]
    pub baseline: Option<PathBuf>,
    /// Also print the (delta) grid
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Built-in grammar
    #[arg(long, value_name = "NAME", conflicts_with = "grammar", required_unless_present = "grammar")]
    pub preset: Option<String>,
    /// Grammar file
    #[arg(long, value_name = "PATH")]
    pub grammar: Option<PathBuf>,
    /// Number of sentences
    #[arg(long, value_name = "N")]
    pub n: usize,
    /// Generation seed
    #[arg(long, value_name = "N")]
    pub seed: u64,
    /// Override the grammar's share of cue-bearing sentences
    #[arg(long, value_name = "F")]
    pub density: Option<f64>,
    /// Output file (default: standard output)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, stdout, stderr)),
            Err(e) => Err(Failure::Data(anyhow!("cannot start thread pool: {e}"))),
        },
        None => dispatch(&cli.command, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_DATA
        }
    }
}

fn dispatch(cmd: &Command, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> CmdResult {
    match cmd {
        Command::Stats(a) => stats(a, stdout),
        Command::Extract(a) => extract(a, stdout, stderr),
        Command::Mask(a) => mask(a, stdout),
        Command::Encode(a) => encode(a, stdout),
        Command::Train(a) => train_cmd(a, stderr),
        Command::Predict(a) => predict(a, stdout),
        Command::Eval(a) => eval_cmd(a, stdout),
        Command::Matrix(a) => matrix(a, stdout),
        Command::Aggregate(a) => aggregate(a, stdout),
        Command::Synth(a) => synth(a, stdout),
    }
}

/// Writes to `--out` when given, otherwise to standard output.
fn with_output(
    out: Option<&Path>,
    stdout: &mut (dyn Write + Send),
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CmdResult {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => f(stdout).context("cannot write output")?,
    }
    Ok(())
}

fn load_corpus(path: &Path) -> anyhow::Result<Vec<AnnotatedSentence>> {
    read_corpus_file(path).with_context(|| format!("{}", path.display()))
}

fn load_lexicon(path: &Path) -> anyhow::Result<CueLexicon> {
    CueLexicon::load_file(path).with_context(|| format!("{}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<TaggerModel> {
    TaggerModel::load(path).with_context(|| format!("{}", path.display()))
}

fn stats(a: &StatsArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    let mut rows = Vec::new();
    for path in &a.inputs {
        rows.push((path.display().to_string(), dataset_stats(&load_corpus(path)?)));
    }
    with_output(None, stdout, |w| {
        if a.pretty {
            let width = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0).max("dataset".len());
            writeln!(w, "{:<width$}  {:>9}  {:>9}  {:>11}", "dataset", "sentences", "negations", "unique_cues")?;
            for (name, s) in &rows {
                writeln!(w, "{:<width$}  {:>9}  {:>9}  {:>11}", name, s.n_sentences, s.n_negations, s.n_unique_cues)?;
            }
        } else {
            for (_, s) in &rows {
                writeln!(w, "{}\t{}\t{}", s.n_sentences, s.n_negations, s.n_unique_cues)?;
            }
        }
        Ok(())
    })
}

fn extract(a: &ExtractArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> CmdResult {
    if a.n_total.is_some() && a.seed.is_none() {
        return Err(usage("--n-total draws a random sample and needs --seed"));
    }
    let mut lex = CueLexicon::bundled();
    for path in &a.lexicon {
        lex = merge(&lex, &load_lexicon(path)?);
    }
    let docs = load_documents(&a.input)?;
    let found = extract_documents(&docs, &lex, &RuleSegmenter::default());
    let _ = writeln!(
        stderr,
        "{} document(s); negation sentences: a={} b={}",
        docs.len(),
        found.count(Source::A),
        found.count(Source::B)
    );
    let corpus = match a.n_total {
        Some(n) => {
            let sample = balanced_sample(
                &found.of_source(Source::A),
                &found.of_source(Source::B),
                n,
                a.seed.expect("checked above"),
                a.strict,
            )?;
            if let Some(k) = sample.clamped_to {
                let _ = writeln!(stderr, "warning: sample reduced from {n} to {k} sentences");
            }
            sample.corpus
        }
        None => found,
    };
    let records = corpus.to_records(&a.corpus);
    with_output(a.out.as_deref(), stdout, |w| {
        for r in &records {
            writeln!(w, "{}", record_line(r))?;
        }
        Ok(())
    })
}

fn mask(a: &MaskArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    let seed = match (a.seed, a.rate == 0.0) {
        (Some(s), _) => s,
        (None, true) => 0,
        (None, false) => return Err(usage("masking with a positive --rate needs --seed")),
    };
    let policy = MaskPolicy { random_rate: a.rate, cue_masking: !a.no_cue_mask, ..MaskPolicy::default() };
    policy.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = load_corpus(&a.input)?;
    let vocab = Vocabulary::from_sentences(&corpus, &WordPieces);
    let masker = Masker::new(policy, &vocab, &WordPieces).map_err(|e| usage(e.to_string()))?;
    let instances = masker.plan_corpus(&corpus, seed);
    with_output(a.out.as_deref(), stdout, |w| {
        for inst in &instances {
            if a.render {
                writeln!(w, "{}", inst.render(&WordPieces))?;
            } else {
                writeln!(w, "{}", inst.to_json())?;
            }
        }
        Ok(())
    })
}

#[derive(serde::Serialize)]
struct EncodedRecord<'a> {
    doc_id: &'a str,
    sent_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cue: Option<usize>,
    tokens: Vec<&'a str>,
    labels: &'a [u8],
}

fn encode(a: &EncodeArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    let corpus = load_corpus(&a.input)?;
    let mut lines = Vec::new();
    if a.conll {
        for (k, s) in corpus.iter().enumerate() {
            lines.push(
                to_conll(s).with_context(|| format!("record {}", k + 1))?.trim_end_matches('\n').to_string() + "\n",
            );
        }
    } else {
        let instances = task_instances(&corpus, a.task.into())?;
        for inst in &instances {
            let s = &corpus[inst.sentence];
            let rec = EncodedRecord {
                doc_id: &s.meta.doc_id,
                sent_id: s.meta.sent_id,
                cue: inst.cue_index,
                tokens: inst.input.surfaces().collect(),
                labels: &inst.labels,
            };
            lines.push(serde_json::to_string(&rec).context("cannot serialize record")?);
        }
    }
    with_output(a.out.as_deref(), stdout, |w| {
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
}

fn labeled(corpus: &[AnnotatedSentence], task: Task) -> anyhow::Result<Vec<LabeledSequence>> {
    Ok(task_instances(corpus, task)?
        .into_iter()
        .map(|i| LabeledSequence { tokens: i.input, labels: i.labels })
        .collect())
}

fn train_cmd(a: &TrainArgs, stderr: &mut (dyn Write + Send)) -> CmdResult {
    let lexicon = a.lexicon.as_deref().map(load_lexicon).transpose()?;
    let corpus = load_corpus(&a.input)?;
    let task: Task = a.task.into();
    let seqs = labeled(&corpus, task)?;
    let model = train(&seqs, task, &TrainConfig { epochs: a.epochs, seed: a.seed, lexicon })?;
    model.save(&a.out).with_context(|| format!("{}", a.out.display()))?;
    let _ =
        writeln!(stderr, "trained {} model on {} instance(s), {} feature(s)", task, seqs.len(), model.features.len());
    Ok(())
}

fn predict(a: &PredictArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    let model = load_model(&a.model)?;
    let corpus = load_corpus(&a.input)?;
    let mut out = Vec::with_capacity(corpus.len());
    for s in &corpus {
        let mut p = s.clone();
        match model.task {
            Task::Cue => {
                let labels = model.predict(&s.tokens);
                let seq =
                    CueLabelSeq::from_ids(&labels).ok_or_else(|| anyhow!("model produced an invalid cue label"))?;
                p.cues = decode_cue(&seq, &s.tokens)?.cues;
                p.scopes.clear();
            }
            Task::Scope => {
                let (instances, _) = scope_instances(s)?;
                p.scopes.clear();
                for inst in &instances {
                    let labels = inst.project(&model.predict(&inst.marked));
                    let toks: Vec<usize> = labels.iter().enumerate().filter(|(_, &l)| l == 1).map(|(i, _)| i).collect();
                    if !toks.is_empty() {
                        p.scopes.push(ScopeAnnotation { cue_index: inst.cue_index, token_indices: toks });
                    }
                }
            }
        }
        out.push(p);
    }
    with_output(a.out.as_deref(), stdout, |w| write_corpus(w, &out))
}

fn eval_cmd(a: &EvalArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    let model = load_model(&a.model)?;
    let corpus = load_corpus(&a.input)?;
    let prf = evaluate(&model, &corpus, a.ignore_punct)?;
    with_output(None, stdout, |w| {
        writeln!(w, "precision\trecall\tf1\ttp\tfp\tfn")?;
        writeln!(w, "{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}", prf.precision, prf.recall, prf.f1, prf.tp, prf.fp, prf.fn_)
    })
}

fn parse_dataset(spec: &str) -> Result<(String, PathBuf, PathBuf), Failure> {
    let bad = || usage(format!("--dataset expects NAME=TRAIN,TEST, got {spec:?}"));
    let (name, paths) = spec.split_once('=').ok_or_else(bad)?;
    let (train, test) = paths.split_once(',').ok_or_else(bad)?;
    if name.is_empty() || train.is_empty() || test.is_empty() {
        return Err(bad());
    }
    Ok((name.to_string(), PathBuf::from(train), PathBuf::from(test)))
}

fn matrix(a: &MatrixArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let mut registry = Vec::new();
    for spec in &a.datasets {
        let (name, train, test) = parse_dataset(spec)?;
        if registry.iter().any(|d: &DatasetSplit| d.name == name) {
            return Err(usage(format!("dataset {name} given twice")));
        }
        registry.push(DatasetSplit { name, train: load_corpus(&train)?, test: load_corpus(&test)? });
    }
    let config = MatrixConfig {
        task: a.task.into(),
        epochs: a.epochs,
        seeds: (0..a.seeds as u64).map(|k| a.seed.wrapping_add(k)).collect(),
        lexicon: a.lexicon.as_deref().map(load_lexicon).transpose()?,
        ignore_punct: a.ignore_punct,
    };
    let m = cross_matrix(&registry, &config)?;
    let text = if a.pretty { m.to_pretty(false) } else { m.to_tsv(false) };
    with_output(a.out.as_deref(), stdout, |w| w.write_all(text.as_bytes()))
}

fn load_matrix(path: &Path) -> anyhow::Result<EvalMatrix> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    EvalMatrix::from_tsv(&text).with_context(|| format!("{}", path.display()))
}

fn aggregate(a: &AggregateArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    let m = load_matrix(&a.matrix)?;
    let (shown, signed) = match &a.baseline {
        Some(b) => (m.delta(&load_matrix(b)?)?, true),
        None => (m, false),
    };
    let agg = shown.aggregate()?;
    with_output(None, stdout, |w| {
        if a.pretty {
            w.write_all(shown.to_pretty(signed).as_bytes())?;
        }
        writeln!(w, "{}", if signed { agg.delta_summary() } else { agg.summary() })
    })
}

fn synth(a: &SynthArgs, stdout: &mut (dyn Write + Send)) -> CmdResult {
    let mut grammar = match (&a.preset, &a.grammar) {
        (Some(name), _) => Grammar::preset(name).map_err(|e| usage(e.to_string()))?,
        (None, Some(path)) => Grammar::load_file(path).with_context(|| format!("{}", path.display()))?,
        (None, None) => return Err(usage("give --preset or --grammar")),
    };
    if let Some(d) = a.density {
        if !(0.0..=1.0).contains(&d) {
            return Err(usage("--density must lie in [0, 1]"));
        }
        grammar.density = d;
    }
    let corpus = generate(&grammar, a.n, a.seed)?;
    with_output(a.out.as_deref(), stdout, |w| {
        for s in &corpus {
            writeln!(w, "{}", to_line(s))?;
        }
        Ok(())
    })
}

/// Every long flag of every subcommand paired with whether its help text mentions it.
pub fn help_coverage() -> Vec<(String, String, bool)> {
    use clap::CommandFactory;
    let mut root = Cli::command();
    root.build();
    let mut out = Vec::new();
    for sub in root.get_subcommands_mut() {
        let name = sub.get_name().to_string();
        let help = sub.render_long_help().to_string();
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                let flag = format!("--{long}");
                out.push((name.clone(), flag.clone(), help.contains(&flag)));
            }
        }
    }
    out
}

/// Runs `negkit` with the process arguments and standard streams.
pub fn main_with_env() -> i32 {
    let mut out = io::stdout();
    let mut err = io::stderr();
    let code = run(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    code
}
