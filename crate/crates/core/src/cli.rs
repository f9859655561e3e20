//! Command-line front end.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{self, encode_all, read_corpus, synthetic, tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::report::evaluate_model;
use crate::gradcheck::{check_model, toy_examples, toy_model};
use crate::model::heatmap::export_attention_heatmap;
use crate::model::{Model, Variant};
use crate::train::checkpoint::{load_checkpoint, save_checkpoint};
use crate::train::trainer::{train, BatchRecord, EpochRecord, TrainObserver};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const EPOCHS_DIR: &str = "epochs";

#[derive(Debug, Parser)]
#[command(name = "hssc", version, about = "Joint review summarization and sentiment classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the corpus, build the vocabulary and train a model.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a corpus.
    Eval(EvalArgs),
    /// Summarize and rate the reviews in a JSON-lines file.
    Decode(DecodeArgs),
    /// Write a seeded synthetic review corpus.
    GenSynthetic(GenArgs),
    /// Finite-difference check of the full model's gradients.
    GradCheck(GradCheckArgs),
}

/// One flag per configuration key; each overrides the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub vocab_cap: Option<String>,
    #[arg(long)]
    pub embed_dim: Option<String>,
    #[arg(long)]
    pub hidden_dim: Option<String>,
    #[arg(long)]
    pub classifier_hidden: Option<String>,
    #[arg(long)]
    pub dropout: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub beta1: Option<String>,
    #[arg(long)]
    pub beta2: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub clip_norm: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    /// on or off
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub schedule_threshold: Option<String>,
    #[arg(long)]
    pub max_decode_len: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// hssc, no_multiview, no_highway, s2s_att or s2s
    #[arg(long)]
    pub variant: Option<String>,
    /// f32 or f64
    #[arg(long)]
    pub precision: Option<String>,
    #[arg(long)]
    pub split_size: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> Vec<(&'static str, &str, String)> {
        let all: [(&'static str, &Option<String>); 21] = [
            ("preset", &self.preset),
            ("vocab_cap", &self.vocab_cap),
            ("embed_dim", &self.embed_dim),
            ("hidden_dim", &self.hidden_dim),
            ("classifier_hidden", &self.classifier_hidden),
            ("dropout", &self.dropout),
            ("batch_size", &self.batch_size),
            ("lambda", &self.lambda),
            ("learning_rate", &self.learning_rate),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("epsilon", &self.epsilon),
            ("clip_norm", &self.clip_norm),
            ("epochs", &self.epochs),
            ("schedule", &self.schedule),
            ("schedule_threshold", &self.schedule_threshold),
            ("max_decode_len", &self.max_decode_len),
            ("seed", &self.seed),
            ("variant", &self.variant),
            ("precision", &self.precision),
            ("split_size", &self.split_size),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v, format!("--{}", k.replace('_', "-")))))
            .collect()
    }

    /// Config file (if any) with these flags applied on top.
    pub fn resolve(&self, file: Option<&Path>) -> Result<RunConfig> {
        let (text, source) = match file {
            Some(p) => (
                fs::read_to_string(p).map_err(|e| Error::file(p, e))?,
                p.display().to_string(),
            ),
            None => (String::new(), String::from("<defaults>")),
        };
        RunConfig::from_sources(&text, &source, self.pairs())
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON-lines corpus with text, summary and label fields.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// train, validation, test or all
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Defaults to the value the checkpoint was trained with.
    #[arg(long)]
    pub split_size: Option<usize>,
    #[arg(long)]
    pub max_decode_len: Option<usize>,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON-lines file; each record needs a "text" field.
    #[arg(long)]
    pub input: PathBuf,
    /// Write one attention heatmap TSV per record into this directory.
    #[arg(long)]
    pub heatmaps: Option<PathBuf>,
    #[arg(long)]
    pub max_decode_len: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Check one variant; all variants when absent.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Exit nonzero when the max relative error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Decode(a) => cmd_decode(&a),
        Command::GenSynthetic(a) => cmd_gen_synthetic(&a),
        Command::GradCheck(a) => cmd_grad_check(&a),
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::file(path, e))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create_file(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes the model with its vocabulary and configuration alongside.
pub fn save_bundle(dir: &Path, model: &Model, vocab: &Vocabulary, cfg: &RunConfig) -> Result<()> {
    save_checkpoint(dir, model, cfg.precision)?;
    vocab.save(&dir.join(VOCAB_FILE))?;
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, cfg.serialize()).map_err(|e| Error::file(&path, e))
}

/// Loads a checkpoint directory and the vocabulary stored with it.
pub fn load_bundle(dir: &Path) -> Result<(Model, Vocabulary, Option<RunConfig>)> {
    let (model, _) = load_checkpoint(dir)?;
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Checkpoint(format!(
            "vocabulary has {} entries but the model expects {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    let cfg_path = dir.join(CONFIG_FILE);
    let cfg = if cfg_path.exists() {
        Some(RunConfig::load(&cfg_path)?)
    } else {
        None
    };
    Ok((model, vocab, cfg))
}

struct TrainLog {
    out: PathBuf,
    metrics: BufWriter<File>,
    vocab: Vocabulary,
    cfg: RunConfig,
    started: Instant,
    batches: usize,
}

impl TrainObserver for TrainLog {
    fn on_batch(&mut self, r: &BatchRecord) -> Result<()> {
        self.batches += 1;
        if self.batches.is_multiple_of(100) {
            eprintln!(
                "epoch {} batch {} lr {:.3e} joint {:.4} ({:.0?})",
                r.epoch + 1,
                r.batch + 1,
                r.lr,
                r.l_joint,
                self.started.elapsed()
            );
        }
        Ok(())
    }

    fn on_epoch(&mut self, r: &EpochRecord, model: &Model) -> Result<()> {
        serde_json::to_writer(&mut self.metrics, r)?;
        self.metrics.write_all(b"\n")?;
        self.metrics.flush()?;
        let dir = self.out.join(EPOCHS_DIR).join(format!("epoch-{:03}", r.epoch + 1));
        save_bundle(&dir, model, &self.vocab, &self.cfg)?;
        eprintln!(
            "epoch {} validation joint {:.4} RG-1 {:.2} RG-L {:.2} acc {} ({:.0?})",
            r.epoch + 1,
            r.l_joint,
            r.rouge_1,
            r.rouge_l,
            r.accuracy_5class.map_or("-".into(), |a| format!("{a:.1}")),
            self.started.elapsed()
        );
        Ok(())
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.flags.resolve(a.config.as_deref())?;
    let corpus = read_corpus(&a.corpus)?;
    let splits = data::split(corpus, cfg.split_size)?;
    let vocab = Vocabulary::build(&splits.train, cfg.vocab_cap)?;
    let train_set = encode_all(&vocab, &splits.train);
    let validation = encode_all(&vocab, &splits.validation);

    fs::create_dir_all(&a.out).map_err(|e| Error::file(&a.out, e))?;
    vocab.save(&a.out.join(VOCAB_FILE))?;
    let cfg_path = a.out.join(CONFIG_FILE);
    fs::write(&cfg_path, cfg.serialize()).map_err(|e| Error::file(&cfg_path, e))?;

    let mut model = Model::new(cfg.model_config(vocab.len()), cfg.seed);
    eprintln!(
        "training {} ({} parameters) on {} examples, vocabulary {}",
        cfg.variant,
        model.num_scalars(),
        train_set.len(),
        vocab.len()
    );
    let mut log = TrainLog {
        out: a.out.clone(),
        metrics: create_file(&a.out.join(METRICS_FILE))?,
        vocab,
        cfg: cfg.clone(),
        started: Instant::now(),
        batches: 0,
    };
    let outcome = train(&mut model, &train_set, &validation, &cfg.train_config(), &mut log)?;
    save_bundle(&a.out.join(CHECKPOINT_DIR), &model, &log.vocab, &cfg)?;
    println!(
        "best epoch {} validation joint loss {:.6} after {} steps; checkpoint in {}",
        outcome.best_epoch.map_or(0, |e| e + 1),
        outcome.best_validation_loss.unwrap_or(f64::NAN),
        outcome.steps,
        a.out.join(CHECKPOINT_DIR).display()
    );
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (model, vocab, saved) = load_bundle(&a.checkpoint)?;
    let saved = saved.unwrap_or_default();
    let split_size = a.split_size.unwrap_or(saved.split_size);
    let max_len = a.max_decode_len.unwrap_or(saved.max_decode_len);
    let corpus = read_corpus(&a.corpus)?;
    let examples = if a.split == "all" {
        corpus
    } else {
        let splits = data::split(corpus, split_size)?;
        splits
            .get(&a.split)
            .ok_or_else(|| Error::Ingest(format!("unknown split {:?} (expected train, validation, test or all)", a.split)))?
            .to_vec()
    };
    let report = evaluate_model(&model, &vocab, &examples, max_len, &a.split)?;
    let mut w = output(a.out.as_deref())?;
    report.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DecodeRecord {
    line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rating: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distribution: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heatmap: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn decode_line(
    model: &Model,
    vocab: &Vocabulary,
    line: &str,
    max_len: usize,
) -> std::result::Result<(DecodeRecord, Option<String>), String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let text = value
        .get("text")
        .and_then(|t| t.as_str())
        .ok_or("record has no \"text\" string")?;
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err("empty text".into());
    }
    let p = model.predict(&vocab.encode(&tokens), max_len).map_err(|e| e.to_string())?;
    let heatmap = if model.config.variant.has_attention() {
        let sentiment = model.config.variant.has_classifier().then_some(p.sentiment_weights.as_slice());
        Some(
            export_attention_heatmap(&p.summary_weights, sentiment, &tokens)
                .map_err(|e| e.to_string())?
                .to_tsv(),
        )
    } else {
        None
    };
    let record = DecodeRecord {
        line: 0,
        summary: Some(data::detokenize(&vocab.decode(&p.tokens))),
        rating: p.class.map(|c| c + 1),
        distribution: p.class_probs,
        heatmap: None,
        error: None,
    };
    Ok((record, heatmap))
}

pub fn cmd_decode(a: &DecodeArgs) -> Result<()> {
    let (model, vocab, saved) = load_bundle(&a.checkpoint)?;
    let max_len = a
        .max_decode_len
        .unwrap_or(saved.map_or(RunConfig::default().max_decode_len, |c| c.max_decode_len));
    if let Some(dir) = &a.heatmaps {
        if !model.config.variant.has_attention() {
            return Err(Error::Checkpoint(format!(
                "{} checkpoints have no attention to export",
                model.config.variant
            )));
        }
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let input = File::open(&a.input).map_err(|e| Error::file(&a.input, e))?;
    let mut w = output(a.out.as_deref())?;
    let mut failures = 0usize;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::file(&a.input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let record = match decode_line(&model, &vocab, &line, max_len) {
            Ok((mut rec, heatmap)) => {
                rec.line = n;
                if let (Some(dir), Some(tsv)) = (&a.heatmaps, heatmap) {
                    let path = dir.join(format!("record-{n:05}.tsv"));
                    fs::write(&path, tsv).map_err(|e| Error::file(&path, e))?;
                    rec.heatmap = Some(path.display().to_string());
                }
                rec
            }
            Err(msg) => {
                failures += 1;
                eprintln!("{}:{n}: {msg}", a.input.display());
                DecodeRecord {
                    line: n,
                    summary: None,
                    rating: None,
                    distribution: None,
                    heatmap: None,
                    error: Some(msg),
                }
            }
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    if failures > 0 {
        eprintln!("{failures} record(s) could not be decoded");
    }
    Ok(())
}

pub fn cmd_gen_synthetic(a: &GenArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::Ingest("n must be at least 1".into()));
    }
    data::write_records(&a.out, &synthetic::generate(a.seed, a.n))
}

pub fn cmd_grad_check(a: &GradCheckArgs) -> Result<()> {
    let variants = match a.variant {
        Some(v) => vec![v],
        None => Variant::ALL.to_vec(),
    };
    let mut worst: f64 = 0.0;
    for v in variants {
        let mut model = toy_model(v, a.seed);
        let batch = toy_examples(a.seed, 2, model.config.vocab_size, 5, 3);
        let started = Instant::now();
        let report = check_model(&mut model, &batch, 0.5, a.eps)?;
        if !report.non_finite.is_empty() {
            return Err(Error::Training(format!("{v}: non-finite loss at {:?}", report.non_finite)));
        }
        println!(
            "{v}: max relative error {:.3e} over {} entries ({:.1?})",
            report.max_rel_error,
            report.entries_checked,
            started.elapsed()
        );
        worst = worst.max(report.max_rel_error);
    }
    if worst > a.tolerance {
        return Err(Error::Training(format!(
            "max relative error {worst:.3e} exceeds tolerance {:.1e}",
            a.tolerance
        )));
    }
    Ok(())
}
