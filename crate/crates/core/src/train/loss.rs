use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// Loss nodes of one example.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    /// Token cross-entropy summed over decode steps.
    pub summary: Var,
    /// Label cross-entropy, absent for summarization-only variants.
    pub classification: Option<Var>,
    /// `summary + lambda * classification`.
    pub joint: Var,
}

/// `L = L_s + λ L_c`, with `L_s` summed over the aligned decode steps.
pub fn joint_loss(
    g: &mut Graph,
    step_logits: &[Var],
    targets: &[usize],
    label_logits: Option<Var>,
    label: usize,
    lambda: f64,
) -> Result<LossTerms> {
    if step_logits.len() != targets.len() {
        return Err(Error::dim(
            "joint_loss",
            format!("{} decode steps for {} targets", step_logits.len(), targets.len()),
        ));
    }
    let per_step = step_logits
        .iter()
        .zip(targets)
        .map(|(&l, &t)| g.cross_entropy(l, t))
        .collect::<Result<Vec<_>>>()?;
    let summary = g.add_all(&per_step)?;
    let classification = label_logits.map(|l| g.cross_entropy(l, label)).transpose()?;
    let joint = match classification {
        Some(c) => {
            let weighted = g.scale(c, lambda);
            g.add(summary, weighted)?
        }
        None => summary,
    };
    Ok(LossTerms {
        summary,
        classification,
        joint,
    })
}
