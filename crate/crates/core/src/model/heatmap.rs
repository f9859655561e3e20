use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Per-token attention averaged over decode steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub tokens: Vec<String>,
    pub summary_view: Vec<f64>,
    pub sentiment_view: Option<Vec<f64>>,
}

fn mean_rows(rows: &[Vec<f64>], len: usize) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::dim("heatmap", "no decode steps"));
    }
    let mut acc = vec![0.0; len];
    for r in rows {
        if r.len() != len {
            return Err(Error::dim("heatmap", format!("{} weights for {len} tokens", r.len())));
        }
        acc.iter_mut().zip(r).for_each(|(a, w)| *a += w);
    }
    let n = rows.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

pub fn export_attention_heatmap(
    summary_weights: &[Vec<f64>],
    sentiment_weights: Option<&[Vec<f64>]>,
    tokens: &[String],
) -> Result<Heatmap> {
    Ok(Heatmap {
        tokens: tokens.to_vec(),
        summary_view: mean_rows(summary_weights, tokens.len())?,
        sentiment_view: sentiment_weights.map(|w| mean_rows(w, tokens.len())).transpose()?,
    })
}

impl Heatmap {
    /// Tab-separated table: a token header row, then one labelled row per view.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("view");
        for t in &self.tokens {
            out.push('\t');
            out.push_str(&t.replace(['\t', '\n'], " "));
        }
        out.push('\n');
        let mut row = |label: &str, w: &[f64]| {
            out.push_str(label);
            for v in w {
                let _ = write!(out, "\t{v:.6}");
            }
            out.push('\n');
        };
        row("summary_view", &self.summary_view);
        if let Some(s) = &self.sentiment_view {
            row("sentiment_view", s);
        }
        out
    }
}
