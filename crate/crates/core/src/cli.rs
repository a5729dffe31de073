//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or model
//! error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::embed::{build_vocab, load_word2vec_binary_with, load_word2vec_text_with, EmbeddingTable, Word2VecOptions};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy_by_answer_length, attention_records, load_dataset, rank_all, write_attention, LoadMode,
    LoadOptions, Metrics, QAExample,
};
use crate::model::ModelKind;
use crate::training::{check_model_gradients, checkpoint_load, checkpoint_save, train, ToyDims, TrainingConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "apnet", version, about = "Answer selection with attentive pooling networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a pool-tsv dataset and save a checkpoint.
    Train(TrainArgs),
    /// Rank every candidate pool and report P@1, MAP and MRR.
    Eval(EvalArgs),
    /// Score one question/answer pair.
    Score(ScoreArgs),
    /// Export attention weights (AP models only) as JSON Lines.
    Attend(AttendArgs),
    /// Finite-difference check of the full training objective at toy sizes.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// QA-CNN, AP-CNN, QA-biLSTM or AP-biLSTM.
    #[arg(long, value_parser = parse_kind)]
    model: ModelKind,
    #[arg(long)]
    data: PathBuf,
    /// Development set; the best dev epoch is the one saved.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    /// Filter count (CNN models).
    #[arg(long)]
    filters: Option<usize>,
    /// Hidden size per direction (biLSTM models).
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    neg: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// word2vec file; `.bin` is read as binary, anything else as text.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    freeze_embeddings: bool,
    #[arg(long)]
    lowercase: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated answer-length edges, e.g. `50,100,150`.
    #[arg(long, value_delimiter = ',')]
    length_buckets: Vec<usize>,
    /// Write the full rankings as TSV.
    #[arg(long)]
    rankings: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    question: String,
    #[arg(long)]
    answer: String,
}

#[derive(Debug, Args)]
struct AttendArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Restrict to these questions (repeatable).
    #[arg(long = "question-id")]
    question_ids: Vec<String>,
    /// Restrict to these candidates within each question (repeatable).
    #[arg(long = "candidate-id")]
    candidate_ids: Vec<String>,
    /// Export at most this many questions.
    #[arg(long)]
    limit: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

/// Runs the CLI with the process streams.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI writing reports to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Score(a) => cmd_score(a),
        Command::Attend(a) => cmd_attend(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok((report, code)) => {
            if out.write_all(report.as_bytes()).and_then(|_| out.flush()).is_err() {
                return EXIT_DATA;
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}

type Report = (String, i32);

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn load_embeddings(path: &Path, opts: &Word2VecOptions) -> Result<EmbeddingTable> {
    if path.extension().is_some_and(|e| e == "bin") {
        load_word2vec_binary_with(path, opts)
    } else {
        load_word2vec_text_with(path, opts)
    }
}

fn corpus_tokens(sets: &[&[QAExample]]) -> Vec<String> {
    let mut tokens = Vec::new();
    for set in sets {
        for ex in *set {
            tokens.extend(ex.question.iter().cloned());
            for c in &ex.candidates {
                tokens.extend(c.tokens.iter().cloned());
            }
        }
    }
    tokens
}

fn fmt_metrics(m: &Metrics) -> String {
    format!("P@1 {:.6} MAP {:.6} MRR {:.6}", m.precision_at_1, m.map, m.mrr)
}

fn cmd_train(a: TrainArgs) -> Result<Report> {
    let conv = a.model.is_convolutional();
    if conv && a.hidden.is_some() {
        return Err(usage(format!("--hidden does not apply to {}", a.model)));
    }
    if !conv && (a.filters.is_some() || a.window.is_some()) {
        return Err(usage(format!("--filters/--window do not apply to {}", a.model)));
    }
    let defaults = TrainingConfig::new(a.model);
    let seed = a.seed.unwrap_or(defaults.seed);

    let pretrained = match &a.embeddings {
        Some(path) => Some(load_embeddings(
            path,
            &Word2VecOptions {
                lowercase: a.lowercase,
                oov_seed: seed,
            },
        )?),
        None => None,
    };
    let dim = a.dim.or(pretrained.as_ref().map(EmbeddingTable::dim)).unwrap_or(defaults.dim);
    let config = TrainingConfig {
        model: a.model,
        dim,
        width: a.filters.or(a.hidden).unwrap_or(defaults.width),
        window: a.window.unwrap_or(defaults.window),
        batch_size: a.batch.unwrap_or(defaults.batch_size),
        margin: a.margin.unwrap_or(defaults.margin),
        learning_rate: a.lr.unwrap_or(defaults.learning_rate),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        neg_samples: a.neg.unwrap_or(defaults.neg_samples),
        seed,
        embeddings_trainable: !a.freeze_embeddings,
        lowercase: a.lowercase,
    };
    config.validate()?;

    let train_opts = LoadOptions {
        mode: LoadMode::Train,
        lowercase: a.lowercase,
    };
    let data = load_dataset(&a.data, &train_opts)?;
    let dev = match &a.dev {
        Some(p) => Some(load_dataset(
            p,
            &LoadOptions {
                mode: LoadMode::Eval,
                ..train_opts
            },
        )?),
        None => None,
    };
    let tokens = corpus_tokens(&[&data, dev.as_deref().unwrap_or(&[])]);
    let embeddings = build_vocab(tokens.iter().map(String::as_str), pretrained.as_ref(), dim, seed)?;

    let mut r = String::new();
    let c = &config;
    let _ = writeln!(
        r,
        "model {} d={} width={} k={} batch={} margin={} lr={} epochs={} neg={} seed={} embeddings={}",
        c.model,
        c.dim,
        c.width,
        if conv { c.window } else { 1 },
        c.batch_size,
        c.margin,
        c.learning_rate,
        c.epochs,
        c.neg_samples,
        c.seed,
        if c.embeddings_trainable { "trainable" } else { "frozen" }
    );
    let _ = writeln!(r, "questions {} vocabulary {}", data.len(), embeddings.vocab_size());

    let outcome = train(config, &data, embeddings, dev.as_deref())?;
    for rec in &outcome.history {
        let _ = write!(
            r,
            "epoch {} lr {:.6} loss {:.6} active {} updates {}",
            rec.epoch, rec.learning_rate, rec.mean_loss, rec.active_triples, rec.updates
        );
        if let Some(m) = &rec.dev {
            let _ = write!(r, " dev {}", fmt_metrics(m));
        }
        r.push('\n');
    }
    let selected = outcome.selected();
    checkpoint_save(&a.out, selected)?;
    let _ = writeln!(r, "saved epoch {}", selected.epoch);
    Ok((r, EXIT_OK))
}

fn eval_options(lowercase: bool) -> LoadOptions {
    LoadOptions {
        mode: LoadMode::Eval,
        lowercase,
    }
}

fn cmd_eval(a: EvalArgs) -> Result<Report> {
    let ckpt = checkpoint_load(&a.checkpoint)?;
    let data = load_dataset(&a.data, &eval_options(ckpt.config.lowercase))?;
    let pools = rank_all(&ckpt.model, &data)?;
    let m = Metrics::from_pools(&pools);

    let mut r = String::new();
    let _ = writeln!(r, "model {} epoch {}", ckpt.model.kind, ckpt.epoch);
    let _ = writeln!(r, "questions {}", m.questions);
    let _ = writeln!(r, "P@1 {:.6}", m.precision_at_1);
    let _ = writeln!(r, "MAP {:.6}", m.map);
    let _ = writeln!(r, "MRR {:.6}", m.mrr);
    if !a.length_buckets.is_empty() {
        for b in accuracy_by_answer_length(&pools, &data, &a.length_buckets)? {
            let _ = writeln!(r, "length<={} accuracy {:.6} questions {}", b.max_length, b.accuracy, b.questions);
        }
    }
    if let Some(path) = &a.rankings {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for pool in &pools {
            for (rank, e) in pool.entries.iter().enumerate() {
                writeln!(w, "{}\t{}\t{}\t{}\t{}", pool.question_id, rank + 1, e.candidate_id, e.score, e.label)
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok((r, EXIT_OK))
}

fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

fn cmd_score(a: ScoreArgs) -> Result<Report> {
    let ckpt = checkpoint_load(&a.checkpoint)?;
    let q = tokenize(&a.question, ckpt.config.lowercase);
    let ans = tokenize(&a.answer, ckpt.config.lowercase);
    if q.is_empty() || ans.is_empty() {
        return Err(usage("question and answer must be nonempty"));
    }
    let (score, _) = ckpt.model.score_pair(&q, &ans)?;
    Ok((format!("{score}\n"), EXIT_OK))
}

fn cmd_attend(a: AttendArgs, stdout: &mut dyn Write) -> Result<Report> {
    let ckpt = checkpoint_load(&a.checkpoint)?;
    if !ckpt.model.kind.is_attentive() {
        return Err(Error::NoAttention(ckpt.model.kind.to_string()));
    }
    let data = load_dataset(
        &a.data,
        &LoadOptions {
            mode: LoadMode::Train,
            lowercase: ckpt.config.lowercase,
        },
    )?;
    let selected = data
        .iter()
        .filter(|ex| a.question_ids.is_empty() || a.question_ids.contains(&ex.question_id))
        .take(a.limit.unwrap_or(usize::MAX));
    let filter = (!a.candidate_ids.is_empty()).then_some(a.candidate_ids.as_slice());
    let mut records = Vec::new();
    for ex in selected {
        records.extend(attention_records(&ckpt.model, ex, filter)?);
    }
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            write_attention(&records, BufWriter::new(file))?;
            Ok((format!("exported {} records\n", records.len()), EXIT_OK))
        }
        None => {
            write_attention(&records, stdout)?;
            Ok((String::new(), EXIT_OK))
        }
    }
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<Report> {
    if !(a.tolerance > 0.0) {
        return Err(usage("--tolerance must be > 0"));
    }
    let mut r = String::new();
    let mut all_passed = true;
    for kind in ModelKind::ALL {
        for trainable in [false, true] {
            let report = check_model_gradients(kind, ToyDims::default(), trainable, a.seed)?;
            let passed = report.passed(a.tolerance);
            all_passed &= passed;
            let _ = writeln!(
                r,
                "{:<10} embeddings={:<9} max_rel_error {:.3e} worst {} coordinates {} kinks {} {}",
                kind.name(),
                if trainable { "trainable" } else { "frozen" },
                report.max_relative_error,
                report.worst_parameter,
                report.coordinates_checked,
                report.kinks.len(),
                if passed { "PASS" } else { "FAIL" }
            );
        }
    }
    Ok((r, if all_passed { EXIT_OK } else { EXIT_DATA }))
}
