use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::data::batch::{make_batches, Batch, EncodedExample};
use crate::error::{Error, Result};
use crate::eval::report::aggregate;
use crate::model::{Dropout, Model};
use crate::rng::{stream, Stream};
use crate::tensor::{Gradients, ParamStore, Precision};
use crate::train::loss::joint_loss;
use crate::train::optim::{clip_gradients, lr_schedule, Adam, AdamConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lambda: f64,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    pub epochs: usize,
    /// Epoch after which the learning rate starts halving; `None` keeps it constant.
    pub schedule_threshold: Option<f64>,
    pub dropout: f64,
    pub seed: u64,
    pub max_decode_len: usize,
    pub precision: Precision,
    /// Only parameters whose names start with one of these prefixes are
    /// updated; `None` trains everything.
    pub trainable_prefixes: Option<Vec<String>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            lambda: 0.5,
            adam: AdamConfig::default(),
            clip_norm: 10.0,
            epochs: 10,
            schedule_threshold: Some(5.0),
            dropout: 0.0,
            seed: 0,
            max_decode_len: 20,
            precision: Precision::F64,
            trainable_prefixes: None,
        }
    }
}

/// Optimizer state plus loop position.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub adam: Adam,
    pub epoch_progress: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub lr: f64,
    pub l_s: f64,
    pub l_c: Option<f64>,
    pub l_joint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: String,
    pub n_examples: usize,
    pub l_s: f64,
    pub l_c: Option<f64>,
    pub l_joint: f64,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    pub accuracy_5class: Option<f64>,
    pub accuracy_2class: Option<f64>,
}

pub trait TrainObserver {
    fn on_batch(&mut self, _record: &BatchRecord) -> Result<()> {
        Ok(())
    }

    fn on_epoch(&mut self, _record: &EpochRecord, _model: &Model) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct Quiet;

impl TrainObserver for Quiet {}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub steps: u64,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    pub last_batch: Option<BatchRecord>,
}

/// Mean per-example losses.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossAverages {
    pub summary: f64,
    pub classification: Option<f64>,
    pub joint: f64,
}

/// Forward + backward over one batch. Gradients of the batch-mean joint loss
/// are accumulated into `grads`.
pub fn accumulate_batch(
    model: &Model,
    batch: &Batch,
    lambda: f64,
    mut dropout: Option<&mut Dropout>,
    grads: &mut Gradients,
) -> Result<LossAverages> {
    let n = batch.len() as f64;
    let mut avg = LossAverages::default();
    let mut lc_total: Option<f64> = None;
    for i in 0..batch.len() {
        let mut g = Graph::new(&model.params);
        let out = model.forward(&mut g, batch.source(i), &batch.input(i)[1..], dropout.as_deref_mut())?;
        let terms = joint_loss(
            &mut g,
            &out.decode.logits(),
            batch.target(i),
            out.label_logits,
            batch.labels[i],
            lambda,
        )?;
        g.backward_scaled(terms.joint, 1.0 / n, grads)?;
        avg.summary += g.scalar(terms.summary) / n;
        avg.joint += g.scalar(terms.joint) / n;
        if let Some(c) = terms.classification {
            *lc_total.get_or_insert(0.0) += g.scalar(c) / n;
        }
    }
    avg.classification = lc_total;
    Ok(avg)
}

/// Teacher-forced losses without dropout, averaged over `examples`.
pub fn evaluate_loss(model: &Model, examples: &[EncodedExample], lambda: f64) -> Result<LossAverages> {
    let mut avg = LossAverages::default();
    if examples.is_empty() {
        return Ok(avg);
    }
    let n = examples.len() as f64;
    let mut lc: Option<f64> = None;
    for ex in examples {
        let mut g = Graph::new(&model.params);
        let out = model.forward(&mut g, &ex.source, &ex.summary, None)?;
        let terms = joint_loss(&mut g, &out.decode.logits(), &out.decode.targets, out.label_logits, ex.label, lambda)?;
        avg.summary += g.scalar(terms.summary) / n;
        avg.joint += g.scalar(terms.joint) / n;
        if let Some(c) = terms.classification {
            *lc.get_or_insert(0.0) += g.scalar(c) / n;
        }
    }
    avg.classification = lc;
    Ok(avg)
}

/// Validation record: teacher-forced losses plus greedy-decode metrics on ids.
pub fn validate(model: &Model, examples: &[EncodedExample], cfg: &TrainConfig, epoch: usize) -> Result<EpochRecord> {
    let losses = evaluate_loss(model, examples, cfg.lambda)?;
    let mut candidates = Vec::with_capacity(examples.len());
    let mut predicted = Vec::with_capacity(examples.len());
    for ex in examples {
        let p = model.predict(&ex.source, cfg.max_decode_len)?;
        candidates.push(p.tokens);
        predicted.push(p.class.map(|c| c as u8 + 1));
    }
    let references: Vec<Vec<usize>> = examples.iter().map(|e| e.summary.clone()).collect();
    let gold: Vec<u8> = examples.iter().map(|e| e.label as u8 + 1).collect();
    let predicted: Option<Vec<u8>> = predicted.into_iter().collect();
    let report = aggregate("validation", &candidates, &references, predicted.as_deref().map(|p| (p, gold.as_slice())))?;
    Ok(EpochRecord {
        epoch,
        split: "validation".into(),
        n_examples: examples.len(),
        l_s: losses.summary,
        l_c: losses.classification,
        l_joint: losses.joint,
        rouge_1: report.rouge_1,
        rouge_2: report.rouge_2,
        rouge_l: report.rouge_l,
        accuracy_5class: report.accuracy_5class,
        accuracy_2class: report.accuracy_2class,
    })
}

pub fn trainable_mask(params: &ParamStore, prefixes: Option<&[String]>) -> Vec<bool> {
    params
        .entries()
        .iter()
        .map(|e| prefixes.is_none_or(|ps| ps.iter().any(|p| e.name.starts_with(p.as_str()))))
        .collect()
}

/// Runs the epoch loop. With a non-empty validation set, `model` ends
/// holding the parameters of the epoch with the lowest validation joint loss.
pub fn train(
    model: &mut Model,
    train_set: &[EncodedExample],
    validation: &[EncodedExample],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Training("batch size must be positive".into()));
    }
    model.params.round_to(cfg.precision);
    let trainable = trainable_mask(&model.params, cfg.trainable_prefixes.as_deref());
    let mut state = TrainState {
        adam: Adam::new(cfg.adam, &model.params),
        epoch_progress: 0.0,
        learning_rate: cfg.adam.learning_rate,
    };
    let mut shuffle = stream(cfg.seed, Stream::Shuffle);
    let mut dropout = Dropout::new(cfg.dropout, stream(cfg.seed, Stream::Dropout));
    let mut grads = Gradients::zeros_like(&model.params);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut last_batch = None;

    for epoch in 0..cfg.epochs {
        let batches = make_batches(train_set, cfg.batch_size, Some(&mut shuffle));
        let nb = batches.len() as f64;
        for (bi, batch) in batches.iter().enumerate() {
            state.epoch_progress = epoch as f64 + bi as f64 / nb;
            state.learning_rate = match cfg.schedule_threshold {
                Some(t) => lr_schedule(state.epoch_progress, cfg.adam.learning_rate, t),
                None => cfg.adam.learning_rate,
            };
            grads.zero();
            let losses = accumulate_batch(model, batch, cfg.lambda, Some(&mut dropout), &mut grads)?;
            if !losses.joint.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {} at epoch {epoch}, batch {bi}",
                    losses.joint
                )));
            }
            clip_gradients(&mut grads, cfg.clip_norm, &trainable, &model.params)?;
            state
                .adam
                .step(&mut model.params, &grads, state.learning_rate, &trainable, cfg.precision)?;
            let record = BatchRecord {
                epoch,
                batch: bi,
                lr: state.learning_rate,
                l_s: losses.summary,
                l_c: losses.classification,
                l_joint: losses.joint,
            };
            observer.on_batch(&record)?;
            last_batch = Some(record);
        }
        state.epoch_progress = (epoch + 1) as f64;

        if !validation.is_empty() {
            let record = validate(model, validation, cfg, epoch)?;
            observer.on_epoch(&record, model)?;
            if best.as_ref().is_none_or(|(l, _, _)| record.l_joint < *l) {
                best = Some((record.l_joint, epoch, model.params.clone()));
            }
        }
    }

    let (best_validation_loss, best_epoch) = match best {
        Some((loss, epoch, params)) => {
            model.params = params;
            (Some(loss), Some(epoch))
        }
        None => (None, None),
    };
    Ok(TrainOutcome {
        steps: state.adam.step,
        best_epoch,
        best_validation_loss,
        last_batch,
    })
}
