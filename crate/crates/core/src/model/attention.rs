use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::model::encoder::ContextMemory;
use crate::tensor::ParamId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewKind {
    Summary,
    Sentiment,
}

/// One bilinear attention view over the context memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionView {
    pub w: ParamId,
    pub kind: ViewKind,
}

/// Per-example cache of `(W h_i)ᵀ` stacked as an `[L, d]` matrix.
#[derive(Clone, Copy, Debug)]
pub struct ViewKeys(Var);

#[derive(Clone, Copy, Debug)]
pub struct Attention {
    pub context: Var,
    pub weights: Var,
    pub scores: Var,
}

impl AttentionView {
    pub fn prepare(&self, g: &mut Graph, memory: &ContextMemory) -> Result<ViewKeys> {
        if memory.is_empty() {
            return Err(Error::dim("attend", "empty context memory"));
        }
        let w = g.param(self.w);
        let keys = g.matmul(w, memory.matrix)?;
        Ok(ViewKeys(g.transpose(keys)?))
    }

    /// `α = softmax(tanh(sᵀ W h_i))`, context `Σ α_i h_i`.
    pub fn attend_with(&self, g: &mut Graph, keys: ViewKeys, s: Var, memory: &ContextMemory) -> Result<Attention> {
        let raw = g.matmul(keys.0, s)?;
        let scores = g.tanh(raw);
        let weights = g.softmax(scores)?;
        let context = g.matmul(memory.matrix, weights)?;
        Ok(Attention {
            context,
            weights,
            scores,
        })
    }

    pub fn attend(&self, g: &mut Graph, s: Var, memory: &ContextMemory) -> Result<Attention> {
        let keys = self.prepare(g, memory)?;
        self.attend_with(g, keys, s, memory)
    }
}
