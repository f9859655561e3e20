//! The joint summarization/classification network and its ablations.
//!
//! A BiLSTM encoder builds the context memory; an LSTM decoder queries it
//! through a summary view (feeding the word generator) and a sentiment view
//! (feeding the classifier); the classifier max-pools the sentiment vectors
//! together with the memory.

pub mod attention;
pub mod classifier;
pub mod decoder;
pub mod encoder;
pub mod heatmap;
pub mod lstm;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{softmax, Graph, Var};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::tensor::{ParamStore, Tensor};

use attention::{AttentionView, ViewKind};
use classifier::{max_over, sentiment_context, ClassifierHead};
use decoder::{greedy_decode, teacher_forced_decode, TeacherForced};
use encoder::{encode, ContextMemory};
use lstm::{uniform, LstmCell};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Two attention views, highway pooling, joint loss.
    Hssc,
    /// One shared attention view serves both summary and sentiment vectors.
    NoMultiview,
    /// Classifier pools the sentiment vectors only.
    NoHighway,
    /// Summarizer with attention, no classifier.
    S2sAtt,
    /// Summarizer without attention: the generator reads the decoder state.
    S2s,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Hssc,
        Variant::NoMultiview,
        Variant::NoHighway,
        Variant::S2sAtt,
        Variant::S2s,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hssc => "hssc",
            Variant::NoMultiview => "no_multiview",
            Variant::NoHighway => "no_highway",
            Variant::S2sAtt => "s2s_att",
            Variant::S2s => "s2s",
        }
    }

    pub fn has_classifier(self) -> bool {
        matches!(self, Variant::Hssc | Variant::NoMultiview | Variant::NoHighway)
    }

    pub fn has_attention(self) -> bool {
        self != Variant::S2s
    }

    /// Whether a separately parameterized sentiment view exists.
    pub fn has_sentiment_view(self) -> bool {
        matches!(self, Variant::Hssc | Variant::NoHighway)
    }

    pub fn shares_views(self) -> bool {
        self == Variant::NoMultiview
    }

    pub fn uses_highway(self) -> bool {
        matches!(self, Variant::Hssc | Variant::NoMultiview)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown model variant {s:?} (expected one of hssc, no_multiview, no_highway, s2s_att, s2s)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub classifier_hidden: usize,
    pub num_classes: usize,
}

/// Parameter handles, resolved once at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelIds {
    pub embedding: crate::tensor::ParamId,
    pub encoder_forward: LstmCell,
    pub encoder_backward: LstmCell,
    pub decoder: LstmCell,
    pub summary_view: Option<AttentionView>,
    pub sentiment_view: Option<AttentionView>,
    pub generator_w: crate::tensor::ParamId,
    pub generator_b: crate::tensor::ParamId,
    pub classifier: Option<ClassifierHead>,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub ids: ModelIds,
}

/// Inverted dropout with its own seeded mask stream.
#[derive(Clone, Debug)]
pub struct Dropout {
    p: f64,
    rng: ChaCha8Rng,
}

impl Dropout {
    pub fn new(p: f64, rng: ChaCha8Rng) -> Self {
        Dropout { p, rng }
    }

    pub fn apply(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        if self.p <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - self.p);
        let n = g.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.gen::<f64>() < self.p { 0.0 } else { keep })
            .collect();
        let shape = g.value(x).shape().to_vec();
        let m = g.constant(Tensor::new(shape, mask)?);
        g.mul(x, m)
    }
}

/// Teacher-forced forward pass of one example.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub memory: ContextMemory,
    pub decode: TeacherForced,
    pub label_logits: Option<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub tokens: Vec<usize>,
    /// Class distribution, zero-based classes; `None` without a classifier.
    pub class_probs: Option<Vec<f64>>,
    pub class: Option<usize>,
    pub summary_weights: Vec<Vec<f64>>,
    pub sentiment_weights: Vec<Vec<f64>>,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Init);
        let ModelConfig {
            variant,
            vocab_size: v,
            embed_dim: e,
            hidden_dim: d,
            ..
        } = config;
        let mut p = ParamStore::new();
        let embedding = p.add("embedding", uniform(&mut rng, &[v, e]));
        let encoder_forward = LstmCell::register(&mut p, "encoder.forward", e, d, &mut rng);
        let encoder_backward = LstmCell::register(&mut p, "encoder.backward", e, d, &mut rng);
        let decoder = LstmCell::register(&mut p, "decoder.lstm", e, d, &mut rng);
        let summary_view = variant.has_attention().then(|| AttentionView {
            w: p.add("attention.summary.w", uniform(&mut rng, &[d, d])),
            kind: ViewKind::Summary,
        });
        let sentiment_view = variant.has_sentiment_view().then(|| AttentionView {
            w: p.add("attention.sentiment.w", uniform(&mut rng, &[d, d])),
            kind: ViewKind::Sentiment,
        });
        let generator_w = p.add("generator.w", uniform(&mut rng, &[v, d]));
        let generator_b = p.add("generator.b", uniform(&mut rng, &[v]));
        let classifier = variant
            .has_classifier()
            .then(|| ClassifierHead::register(&mut p, d, config.classifier_hidden, config.num_classes, &mut rng));
        Model {
            config,
            params: p,
            ids: ModelIds {
                embedding,
                encoder_forward,
                encoder_backward,
                decoder,
                summary_view,
                sentiment_view,
                generator_w,
                generator_b,
                classifier,
            },
        }
    }

    /// Rebuilds a model around loaded parameters, which must match the
    /// names, order and shapes `config` implies.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Model::new(config, 0);
        if model.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "{} variant expects {} parameters, found {}",
                config.variant,
                model.params.len(),
                params.len()
            )));
        }
        for (want, got) in model.params.entries().iter().zip(params.entries()) {
            if want.name != got.name || want.value.shape() != got.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "expected parameter {} {:?}, found {} {:?}",
                    want.name,
                    want.value.shape(),
                    got.name,
                    got.value.shape()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    /// Copies every parameter of `other` whose name and shape exist here.
    /// Returns the number copied.
    pub fn copy_matching(&mut self, other: &Model) -> usize {
        let mut copied = 0;
        for e in other.params.entries() {
            if let Some(id) = self.params.find(&e.name) {
                if self.params.get(id).shape() == e.value.shape() {
                    *self.params.get_mut(id) = e.value.clone();
                    copied += 1;
                }
            }
        }
        copied
    }

    pub fn num_scalars(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        source: &[usize],
        summary: &[usize],
        mut dropout: Option<&mut Dropout>,
    ) -> Result<ForwardOutput> {
        let memory = encode(self, g, source, dropout.as_deref_mut())?;
        let decode = teacher_forced_decode(self, g, &memory, summary, dropout.as_deref_mut())?;
        let label_logits = self.label_logits(g, &decode.sentiment_vectors(), &memory, dropout)?;
        Ok(ForwardOutput {
            memory,
            decode,
            label_logits,
        })
    }

    /// Pools the sentiment vectors (with the memory under the highway) and
    /// runs the classifier head.
    pub fn label_logits(
        &self,
        g: &mut Graph,
        sentiment: &[Var],
        memory: &ContextMemory,
        dropout: Option<&mut Dropout>,
    ) -> Result<Option<Var>> {
        let Some(head) = self.ids.classifier else {
            return Ok(None);
        };
        let r = if self.config.variant.uses_highway() {
            sentiment_context(g, sentiment, &memory.states)?
        } else {
            max_over(g, sentiment)?
        };
        head.logits(g, r, dropout).map(Some)
    }

    pub fn predict(&self, source: &[usize], max_len: usize) -> Result<Prediction> {
        let mut g = Graph::new(&self.params);
        let memory = encode(self, &mut g, source, None)?;
        let out = greedy_decode(self, &mut g, &memory, max_len)?;
        let logits = self.label_logits(&mut g, &out.sentiment_vectors(), &memory, None)?;
        let class_probs = logits.map(|l| softmax(g.value(l).data()));
        let class = class_probs.as_deref().map(crate::autodiff::argmax);
        let weights = |a: Option<attention::Attention>| a.map(|a| g.value(a.weights).data().to_vec());
        Ok(Prediction {
            tokens: out.tokens,
            class,
            summary_weights: out.steps.iter().filter_map(|s| weights(s.summary)).collect(),
            sentiment_weights: out.steps.iter().filter_map(|s| weights(s.sentiment)).collect(),
            class_probs,
        })
    }
}
