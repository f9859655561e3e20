use crate::autodiff::{argmax, Graph, Var};
use crate::data::vocab::{BOS, EOS};
use crate::error::{Error, Result};
use crate::model::attention::{Attention, ViewKeys};
use crate::model::encoder::{embed, ContextMemory};
use crate::model::lstm::LstmState;
use crate::model::{Dropout, Model};

/// Attention keys of both views for one source memory.
#[derive(Clone, Copy, Debug)]
pub struct DecoderContext {
    summary: Option<ViewKeys>,
    sentiment: Option<ViewKeys>,
}

impl DecoderContext {
    pub fn new(model: &Model, g: &mut Graph, memory: &ContextMemory) -> Result<Self> {
        let summary = model.ids.summary_view.map(|v| v.prepare(g, memory)).transpose()?;
        let sentiment = model.ids.sentiment_view.map(|v| v.prepare(g, memory)).transpose()?;
        Ok(DecoderContext { summary, sentiment })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepOutput {
    pub hidden: Var,
    /// `v^(c)`; `None` for the attention-free variant.
    pub summary: Option<Attention>,
    /// `v^(t)`; the summary attention itself when the views are shared.
    pub sentiment: Option<Attention>,
    pub logits: Var,
}

impl StepOutput {
    pub fn sentiment_vector(&self) -> Option<Var> {
        self.sentiment.map(|a| a.context)
    }
}

pub fn decode_step(
    model: &Model,
    g: &mut Graph,
    ctx: &DecoderContext,
    prev_token: usize,
    state: LstmState,
    memory: &ContextMemory,
    dropout: Option<&mut Dropout>,
) -> Result<(StepOutput, LstmState)> {
    if prev_token >= model.config.vocab_size {
        return Err(Error::Index {
            op: "decode_step",
            index: prev_token,
            len: model.config.vocab_size,
        });
    }
    let x = embed(model, g, &[prev_token], dropout)?[0];
    let next = model.ids.decoder.step(g, x, state)?;
    let s = next.h;

    let summary = match (model.ids.summary_view, ctx.summary) {
        (Some(view), Some(keys)) => Some(view.attend_with(g, keys, s, memory)?),
        _ => None,
    };
    let sentiment = match (model.ids.sentiment_view, ctx.sentiment) {
        (Some(view), Some(keys)) => Some(view.attend_with(g, keys, s, memory)?),
        _ if model.config.variant.shares_views() => summary,
        _ => None,
    };

    let feature = summary.map_or(s, |a| a.context);
    let wg = g.param(model.ids.generator_w);
    let bg = g.param(model.ids.generator_b);
    let logits = g.matmul(wg, feature)?;
    let logits = g.add(logits, bg)?;
    Ok((
        StepOutput {
            hidden: s,
            summary,
            sentiment,
            logits,
        },
        next,
    ))
}

/// Teacher-forced decoding over `<bos> y_1..y_M`, predicting `y_1..y_M <eos>`.
#[derive(Clone, Debug)]
pub struct TeacherForced {
    pub steps: Vec<StepOutput>,
    pub targets: Vec<usize>,
}

impl TeacherForced {
    pub fn logits(&self) -> Vec<Var> {
        self.steps.iter().map(|s| s.logits).collect()
    }

    pub fn sentiment_vectors(&self) -> Vec<Var> {
        self.steps.iter().filter_map(StepOutput::sentiment_vector).collect()
    }
}

pub fn teacher_forced_decode(
    model: &Model,
    g: &mut Graph,
    memory: &ContextMemory,
    gold: &[usize],
    mut dropout: Option<&mut Dropout>,
) -> Result<TeacherForced> {
    if gold.is_empty() {
        return Err(Error::dim("teacher_forced_decode", "empty gold summary"));
    }
    let ctx = DecoderContext::new(model, g, memory)?;
    let mut state = memory.final_state;
    let mut steps = Vec::with_capacity(gold.len() + 1);
    let inputs = std::iter::once(BOS).chain(gold.iter().copied());
    for prev in inputs {
        let (out, next) = decode_step(model, g, &ctx, prev, state, memory, dropout.as_deref_mut())?;
        steps.push(out);
        state = next;
    }
    let mut targets = gold.to_vec();
    targets.push(EOS);
    Ok(TeacherForced { steps, targets })
}

#[derive(Clone, Debug)]
pub struct Greedy {
    /// Emitted tokens, `<eos>` excluded.
    pub tokens: Vec<usize>,
    /// Every executed step, including the one that emitted `<eos>`.
    pub steps: Vec<StepOutput>,
}

impl Greedy {
    pub fn sentiment_vectors(&self) -> Vec<Var> {
        self.steps.iter().filter_map(StepOutput::sentiment_vector).collect()
    }
}

/// Argmax decoding from `<bos>` until `<eos>` or `max_len` steps.
pub fn greedy_decode(model: &Model, g: &mut Graph, memory: &ContextMemory, max_len: usize) -> Result<Greedy> {
    if max_len == 0 {
        return Err(Error::dim("greedy_decode", "max_len must be at least 1"));
    }
    let ctx = DecoderContext::new(model, g, memory)?;
    let mut state = memory.final_state;
    let mut prev = BOS;
    let mut tokens = Vec::new();
    let mut steps = Vec::new();
    for _ in 0..max_len {
        let (out, next) = decode_step(model, g, &ctx, prev, state, memory, None)?;
        steps.push(out);
        state = next;
        let tok = argmax(g.value(out.logits).data());
        if tok == EOS {
            break;
        }
        tokens.push(tok);
        prev = tok;
    }
    Ok(Greedy { tokens, steps })
}
