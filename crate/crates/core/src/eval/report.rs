use std::hash::Hash;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::ReviewExample;
use crate::data::Vocabulary;
use crate::error::Result;
use crate::eval::accuracy::{accuracy_2class, accuracy_5class};
use crate::eval::rouge::{rouge_l, rouge_n};
use crate::model::Model;

/// Corpus-level metrics. ROUGE values are mean per-example F1 ×100 to two
/// decimals; accuracies are ×100 to one decimal.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub split: String,
    pub n_examples: usize,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    pub accuracy_5class: Option<f64>,
    pub accuracy_2class: Option<f64>,
    /// Generated summaries with no tokens; they score zero.
    pub empty_summaries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricLine {
    pub metric_name: String,
    pub value: f64,
    pub split: String,
    pub n_examples: usize,
}

fn round_to(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

/// Scores candidate/reference pairs and optional (predicted, gold) ratings.
pub fn aggregate<T: Eq + Hash>(
    split: &str,
    candidates: &[Vec<T>],
    references: &[Vec<T>],
    ratings: Option<(&[u8], &[u8])>,
) -> Result<MetricReport> {
    assert_eq!(candidates.len(), references.len(), "one candidate per reference");
    let n = candidates.len();
    let (mut r1, mut r2, mut rl) = (0.0, 0.0, 0.0);
    for (c, r) in candidates.iter().zip(references) {
        r1 += rouge_n(c, r, 1).f1;
        r2 += rouge_n(c, r, 2).f1;
        rl += rouge_l(c, r).f1;
    }
    let mean = |s: f64| if n == 0 { 0.0 } else { round_to(100.0 * s / n as f64, 2) };
    let (accuracy_5class, accuracy_2class) = match ratings {
        Some((pred, gold)) if !gold.is_empty() => (
            Some(round_to(100.0 * accuracy_5class(pred, gold)?, 1)),
            accuracy_2class(pred, gold)?.map(|a| round_to(100.0 * a, 1)),
        ),
        _ => (None, None),
    };
    Ok(MetricReport {
        split: split.to_string(),
        n_examples: n,
        rouge_1: mean(r1),
        rouge_2: mean(r2),
        rouge_l: mean(rl),
        accuracy_5class,
        accuracy_2class,
        empty_summaries: candidates.iter().filter(|c| c.is_empty()).count(),
    })
}

/// Greedy-decodes and classifies every example.
pub fn evaluate_model(
    model: &Model,
    vocab: &Vocabulary,
    examples: &[ReviewExample],
    max_len: usize,
    split: &str,
) -> Result<MetricReport> {
    let mut candidates = Vec::with_capacity(examples.len());
    let mut predicted = Vec::with_capacity(examples.len());
    for ex in examples {
        let p = model.predict(&vocab.encode(&ex.text), max_len)?;
        candidates.push(vocab.decode(&p.tokens));
        predicted.push(p.class.map(|c| c as u8 + 1));
    }
    let references: Vec<Vec<String>> = examples.iter().map(|e| e.summary.clone()).collect();
    let gold: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let ratings: Option<Vec<u8>> = predicted.into_iter().collect();
    aggregate(split, &candidates, &references, ratings.as_deref().map(|p| (p, gold.as_slice())))
}

impl MetricReport {
    pub fn lines(&self) -> Vec<MetricLine> {
        let mut out = vec![];
        let mut push = |name: &str, value: f64| {
            out.push(MetricLine {
                metric_name: name.to_string(),
                value,
                split: self.split.clone(),
                n_examples: self.n_examples,
            })
        };
        push("rouge_1_f1", self.rouge_1);
        push("rouge_2_f1", self.rouge_2);
        push("rouge_l_f1", self.rouge_l);
        if let Some(a) = self.accuracy_5class {
            push("accuracy_5class", a);
        }
        if let Some(a) = self.accuracy_2class {
            push("accuracy_2class", a);
        }
        push("empty_summaries", self.empty_summaries as f64);
        out
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<usize> {
        let lines = self.lines();
        for l in &lines {
            serde_json::to_writer(&mut w, l)?;
            w.write_all(b"\n")?;
        }
        Ok(lines.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn self_comparison_is_perfect() {
        let refs = vec![toks("great toy"), toks("awful doll !")];
        let r = aggregate("test", &refs, &refs, Some((&[5, 1], &[5, 1]))).unwrap();
        assert_eq!(r.rouge_1, 100.0);
        assert_eq!(r.rouge_l, 100.0);
        assert_eq!(r.accuracy_5class, Some(100.0));
        assert_eq!(r.accuracy_2class, Some(100.0));
    }

    #[test]
    fn single_example_equals_its_scores() {
        let c = vec![toks("a b c")];
        let r = vec![toks("a b d")];
        let rep = aggregate("test", &c, &r, None).unwrap();
        assert_eq!(rep.rouge_1, 66.67);
        assert_eq!(rep.rouge_2, 50.0);
        assert_eq!(rep.rouge_l, 66.67);
        assert_eq!(rep.accuracy_5class, None);
    }

    #[test]
    fn empty_candidates_score_zero_and_are_counted() {
        let c = vec![vec![], toks("a")];
        let r = vec![toks("a"), toks("a")];
        let rep = aggregate("test", &c, &r, None).unwrap();
        assert_eq!(rep.empty_summaries, 1);
        assert_eq!(rep.rouge_1, 50.0);
    }

    #[test]
    fn lines_omit_undefined_two_class() {
        let c = vec![toks("a")];
        let rep = aggregate("validation", &c, &c, Some((&[3], &[3]))).unwrap();
        let lines = rep.lines();
        assert!(lines.iter().all(|l| l.metric_name != "accuracy_2class"));
        let mut buf = Vec::new();
        let n = rep.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), n);
        assert_eq!(n, lines.len());
    }
}
