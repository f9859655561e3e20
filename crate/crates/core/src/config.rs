//! Run configuration: a flat `key = value` text format.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. A `preset` selects the per-dataset dimensions and dropout, and
//! any explicit `embed_dim`, `hidden_dim` or `dropout` overrides it no
//! matter where it appears in the file.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};
use crate::tensor::Precision;
use crate::train::optim::AdamConfig;
use crate::train::trainer::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Toys,
    Sports,
    Movies,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Toys => "toys",
            Preset::Sports => "sports",
            Preset::Movies => "movies",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "toys" => Some(Preset::Toys),
            "sports" => Some(Preset::Sports),
            "movies" => Some(Preset::Movies),
            _ => None,
        }
    }

    /// Embedding/hidden size shared by both.
    pub fn dim(self) -> usize {
        match self {
            Preset::Toys => 256,
            Preset::Sports | Preset::Movies => 512,
        }
    }

    pub fn dropout(self) -> f64 {
        match self {
            Preset::Toys => 0.2,
            Preset::Sports => 0.05,
            Preset::Movies => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub vocab_cap: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub classifier_hidden: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub schedule: bool,
    pub schedule_threshold: f64,
    pub max_decode_len: usize,
    pub seed: u64,
    pub variant: Variant,
    pub precision: Precision,
    pub split_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::with_preset(Preset::Toys)
    }
}

/// Keys in serialization order. `preset` comes first so that reading it
/// back cannot clobber the explicit values after it.
pub const KEYS: [&str; 21] = [
    "preset",
    "vocab_cap",
    "embed_dim",
    "hidden_dim",
    "classifier_hidden",
    "dropout",
    "batch_size",
    "lambda",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "clip_norm",
    "epochs",
    "schedule",
    "schedule_threshold",
    "max_decode_len",
    "seed",
    "variant",
    "precision",
    "split_size",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("{key}: expected on/off, got {value:?}")),
    }
}

impl RunConfig {
    pub fn with_preset(preset: Preset) -> Self {
        let adam = AdamConfig::default();
        RunConfig {
            preset,
            vocab_cap: 50_000,
            embed_dim: preset.dim(),
            hidden_dim: preset.dim(),
            classifier_hidden: 512,
            dropout: preset.dropout(),
            batch_size: 64,
            lambda: 0.5,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            clip_norm: 10.0,
            epochs: 10,
            schedule: true,
            schedule_threshold: 5.0,
            max_decode_len: 20,
            seed: 0,
            variant: Variant::Hssc,
            precision: Precision::F64,
            split_size: 1000,
        }
    }

    /// Applies one setting. `preset` does not touch the fields it governs;
    /// use [`RunConfig::apply`] for preset-aware assignment.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "preset" => {
                self.preset = Preset::parse(value)
                    .ok_or_else(|| format!("preset: unknown preset {value:?} (expected toys, sports or movies)"))?
            }
            "vocab_cap" => self.vocab_cap = parse_num(key, value)?,
            "embed_dim" => self.embed_dim = parse_num(key, value)?,
            "hidden_dim" => self.hidden_dim = parse_num(key, value)?,
            "classifier_hidden" => self.classifier_hidden = parse_num(key, value)?,
            "dropout" => self.dropout = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "beta1" => self.beta1 = parse_num(key, value)?,
            "beta2" => self.beta2 = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "clip_norm" => self.clip_norm = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "schedule" => self.schedule = parse_bool(key, value)?,
            "schedule_threshold" => self.schedule_threshold = parse_num(key, value)?,
            "max_decode_len" => self.max_decode_len = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "variant" => self.variant = value.parse().map_err(|e| format!("variant: {e}"))?,
            "precision" => {
                self.precision = Precision::parse(value)
                    .ok_or_else(|| format!("precision: expected f32 or f64, got {value:?}"))?
            }
            "split_size" => self.split_size = parse_num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies settings in order of appearance, except that a `preset`
    /// fills in its dimensions and dropout before everything else, so
    /// explicit values win. Every problem is collected before failing.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str, String)>) -> Result<()> {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let mut errors = Vec::new();
        for (key, value, origin) in pairs.iter().filter(|(k, _, _)| *k == "preset") {
            match self.set(key, value) {
                Ok(()) => {
                    self.embed_dim = self.preset.dim();
                    self.hidden_dim = self.preset.dim();
                    self.dropout = self.preset.dropout();
                }
                Err(e) => errors.push(format!("{origin}: {e}")),
            }
        }
        for (key, value, origin) in pairs.iter().filter(|(k, _, _)| *k != "preset") {
            if let Err(e) = self.set(key, value) {
                errors.push(format!("{origin}: {e}"));
            }
        }
        errors.extend(self.problems());
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        RunConfig::from_sources(text, source, Vec::new())
    }

    /// Parses config text, then applies `overrides` (e.g. command-line
    /// flags) on top. Problems from both are reported together.
    pub fn from_sources(text: &str, source: &str, overrides: Vec<(&str, &str, String)>) -> Result<Self> {
        let mut errors = Vec::new();
        let mut pairs = Vec::new();
        let mut seen = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let origin = format!("{source}:{}", i + 1);
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("{origin}: expected key = value"));
                continue;
            };
            let key = key.trim();
            if let Some(prev) = seen.insert(key, i + 1) {
                errors.push(format!("{origin}: {key} already set on line {prev}"));
                continue;
            }
            pairs.push((key, value.trim(), origin));
        }
        pairs.extend(overrides);
        let mut cfg = RunConfig::default();
        if let Err(Error::Config(more)) = cfg.apply(pairs) {
            errors.extend(more);
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        RunConfig::parse(&text, &path.display().to_string())
    }

    pub fn value(&self, key: &str) -> Option<String> {
        Some(match key {
            "preset" => self.preset.name().to_string(),
            "vocab_cap" => self.vocab_cap.to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "hidden_dim" => self.hidden_dim.to_string(),
            "classifier_hidden" => self.classifier_hidden.to_string(),
            "dropout" => self.dropout.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "lambda" => self.lambda.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "beta1" => self.beta1.to_string(),
            "beta2" => self.beta2.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "clip_norm" => self.clip_norm.to_string(),
            "epochs" => self.epochs.to_string(),
            "schedule" => if self.schedule { "on" } else { "off" }.to_string(),
            "schedule_threshold" => self.schedule_threshold.to_string(),
            "max_decode_len" => self.max_decode_len.to_string(),
            "seed" => self.seed.to_string(),
            "variant" => self.variant.name().to_string(),
            "precision" => self.precision.name().to_string(),
            "split_size" => self.split_size.to_string(),
            _ => return None,
        })
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value(key).unwrap_or_default());
        }
        out
    }

    /// Every range violation, in key order.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                p.push(msg);
            }
        };
        check(self.vocab_cap >= 5, format!("vocab_cap must be at least 5, got {}", self.vocab_cap));
        check(self.embed_dim > 0, "embed_dim must be positive".into());
        check(self.hidden_dim > 0, "hidden_dim must be positive".into());
        check(self.classifier_hidden > 0, "classifier_hidden must be positive".into());
        check(
            (0.0..1.0).contains(&self.dropout),
            format!("dropout must be in [0, 1), got {}", self.dropout),
        );
        check(self.batch_size > 0, "batch_size must be positive".into());
        check(
            self.lambda.is_finite() && self.lambda >= 0.0,
            format!("lambda must be non-negative, got {}", self.lambda),
        );
        check(
            self.learning_rate.is_finite() && self.learning_rate > 0.0,
            format!("learning_rate must be positive, got {}", self.learning_rate),
        );
        check((0.0..1.0).contains(&self.beta1), format!("beta1 must be in [0, 1), got {}", self.beta1));
        check((0.0..1.0).contains(&self.beta2), format!("beta2 must be in [0, 1), got {}", self.beta2));
        check(
            self.epsilon.is_finite() && self.epsilon > 0.0,
            format!("epsilon must be positive, got {}", self.epsilon),
        );
        check(
            self.clip_norm.is_finite() && self.clip_norm > 0.0,
            format!("clip_norm must be positive, got {}", self.clip_norm),
        );
        check(self.epochs > 0, "epochs must be positive".into());
        check(
            self.schedule_threshold.is_finite() && self.schedule_threshold >= 0.0,
            format!("schedule_threshold must be non-negative, got {}", self.schedule_threshold),
        );
        check(self.max_decode_len > 0, "max_decode_len must be positive".into());
        check(self.split_size > 0, "split_size must be positive".into());
        p
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            classifier_hidden: self.classifier_hidden,
            num_classes: crate::data::corpus::NUM_CLASSES,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            lambda: self.lambda,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            clip_norm: self.clip_norm,
            epochs: self.epochs,
            schedule_threshold: self.schedule.then_some(self.schedule_threshold),
            dropout: self.dropout,
            seed: self.seed,
            max_decode_len: self.max_decode_len,
            precision: self.precision,
            trainable_prefixes: None,
        }
    }
}
