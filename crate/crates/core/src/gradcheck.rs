//! Central finite-difference verification of recorded gradients.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::data::batch::EncodedExample;
use crate::data::vocab::RESERVED;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, Variant};
use crate::rng::{stream, Stream};
use crate::tensor::{Gradients, ParamId, ParamStore};
use crate::train::loss::{joint_loss, LossTerms};

/// Denominator floor for the relative error. Central differences in `f64`
/// resolve a gradient only to about `2.2e-16 * |f| / eps` (≈3e-10 for a loss
/// near 13 at `eps = 1e-5`), so entries smaller than this floor are judged on
/// absolute error instead.
pub const REL_ERR_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct EntryError {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<EntryError>,
    pub entries_checked: usize,
    /// Entries whose perturbed evaluations were not finite.
    pub non_finite: Vec<(String, usize)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares the gradient recorded by `f` against `(f(θ+eps) − f(θ−eps)) / 2eps`
/// for every entry of the selected parameters (all parameters when `only` is `None`).
pub fn check_gradients<F>(
    store: &mut ParamStore,
    eps: f64,
    only: Option<&[ParamId]>,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::dim("check_gradients", format!("eps must be positive, got {eps}")));
    }
    let mut grads = Gradients::zeros_like(store);
    {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        g.backward(loss, &mut grads)?;
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        Ok(g.scalar(loss))
    };

    let ids: Vec<ParamId> = match only {
        Some(ids) => ids.to_vec(),
        None => store.ids().collect(),
    };
    let mut report = GradCheckReport::default();
    for id in ids {
        for index in 0..store.get(id).len() {
            let orig = store.get(id).data()[index];
            store.get_mut(id).data_mut()[index] = orig + eps;
            let plus = eval(store);
            store.get_mut(id).data_mut()[index] = orig - eps;
            let minus = eval(store);
            store.get_mut(id).data_mut()[index] = orig;
            let (plus, minus) = (plus?, minus?);
            report.entries_checked += 1;
            if !plus.is_finite() || !minus.is_finite() {
                report.non_finite.push((store.name(id).to_string(), index));
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.get(id).data()[index];
            let rel = relative_error(analytic, numeric);
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some(EntryError {
                    param: store.name(id).to_string(),
                    index,
                    analytic,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}

/// Small model for full-model checks: vocabulary 20, every width 8.
pub fn toy_model(variant: Variant, seed: u64) -> Model {
    Model::new(
        ModelConfig {
            variant,
            vocab_size: 20,
            embed_dim: 8,
            hidden_dim: 8,
            classifier_hidden: 8,
            num_classes: 5,
        },
        seed,
    )
}

/// `n` random examples over ordinary (non-reserved) token ids.
pub fn toy_examples(seed: u64, n: usize, vocab_size: usize, source_len: usize, summary_len: usize) -> Vec<EncodedExample> {
    let mut rng = stream(seed, Stream::Synthetic);
    let lo = RESERVED.len();
    (0..n)
        .map(|_| EncodedExample {
            source: (0..source_len).map(|_| rng.gen_range(lo..vocab_size)).collect(),
            summary: (0..summary_len).map(|_| rng.gen_range(lo..vocab_size)).collect(),
            label: rng.gen_range(0..5),
        })
        .collect()
}

/// Batch-mean loss terms over `examples`, without dropout.
pub fn batch_loss(model: &Model, g: &mut Graph, examples: &[EncodedExample], lambda: f64) -> Result<LossTerms> {
    let (mut summary, mut classification, mut joint) = (Vec::new(), Vec::new(), Vec::new());
    for ex in examples {
        let out = model.forward(g, &ex.source, &ex.summary, None)?;
        let terms = joint_loss(g, &out.decode.logits(), &out.decode.targets, out.label_logits, ex.label, lambda)?;
        summary.push(terms.summary);
        classification.extend(terms.classification);
        joint.push(terms.joint);
    }
    let inv = 1.0 / examples.len() as f64;
    let mean = |g: &mut Graph, vs: &[Var]| -> Result<Var> {
        let s = g.add_all(vs)?;
        Ok(g.scale(s, inv))
    };
    Ok(LossTerms {
        summary: mean(g, &summary)?,
        classification: if classification.is_empty() {
            None
        } else {
            Some(mean(g, &classification)?)
        },
        joint: mean(g, &joint)?,
    })
}

/// Checks the batch-mean joint loss of `model` over every parameter.
pub fn check_model(model: &mut Model, examples: &[EncodedExample], lambda: f64, eps: f64) -> Result<GradCheckReport> {
    let shell = Model {
        config: model.config,
        params: ParamStore::new(),
        ids: model.ids.clone(),
    };
    check_gradients(&mut model.params, eps, None, |g| {
        Ok(batch_loss(&shell, g, examples, lambda)?.joint)
    })
}
