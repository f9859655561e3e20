use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::model::lstm::uniform;
use crate::model::Dropout;
use crate::tensor::{ParamId, ParamStore};

/// Two-layer ReLU network mapping the pooled sentiment context to label logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifierHead {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl ClassifierHead {
    pub fn register<R: Rng>(store: &mut ParamStore, input: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        ClassifierHead {
            w1: store.add("classifier.w1", uniform(rng, &[hidden, input])),
            b1: store.add("classifier.b1", uniform(rng, &[hidden])),
            w2: store.add("classifier.w2", uniform(rng, &[classes, hidden])),
            b2: store.add("classifier.b2", uniform(rng, &[classes])),
        }
    }

    /// `W2 · relu(W1 · r + b1) + b2`; dropout, when given, applies to `r`.
    pub fn logits(&self, g: &mut Graph, r: Var, dropout: Option<&mut Dropout>) -> Result<Var> {
        let r = match dropout {
            Some(d) => d.apply(g, r)?,
            None => r,
        };
        let (w1, b1, w2, b2) = (g.param(self.w1), g.param(self.b1), g.param(self.w2), g.param(self.b2));
        let h = g.matmul(w1, r)?;
        let h = g.add(h, b1)?;
        let h = g.relu(h);
        let o = g.matmul(w2, h)?;
        g.add(o, b2)
    }
}

/// Elementwise max over a non-empty set of `[d]` vectors.
pub fn max_over(g: &mut Graph, vectors: &[Var]) -> Result<Var> {
    let m = g.concat_seq(vectors)?;
    g.maxpool_seq(m)
}

/// `r = max(v^(t)_1..v^(t)_M ⊕ h_1..h_L)`.
pub fn sentiment_context(g: &mut Graph, sentiment: &[Var], memory: &[Var]) -> Result<Var> {
    if sentiment.is_empty() || memory.is_empty() {
        return Err(Error::dim(
            "sentiment_context",
            format!("needs M, L >= 1, got M={} L={}", sentiment.len(), memory.len()),
        ));
    }
    let all: Vec<Var> = sentiment.iter().chain(memory).copied().collect();
    max_over(g, &all)
}
