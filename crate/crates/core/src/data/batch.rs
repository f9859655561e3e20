use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::corpus::ReviewExample;
use crate::data::vocab::{Vocabulary, BOS, EOS, PAD};

/// A numericalized example. `label` is the zero-based class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedExample {
    pub source: Vec<usize>,
    pub summary: Vec<usize>,
    pub label: usize,
}

impl EncodedExample {
    pub fn new(vocab: &Vocabulary, ex: &ReviewExample) -> Self {
        EncodedExample {
            source: vocab.encode(&ex.text),
            summary: vocab.encode(&ex.summary),
            label: ex.class(),
        }
    }
}

pub fn encode_all(vocab: &Vocabulary, examples: &[ReviewExample]) -> Vec<EncodedExample> {
    examples.iter().map(|e| EncodedExample::new(vocab, e)).collect()
}

/// Padded id matrices for a group of examples.
///
/// Decoder inputs are `<bos>`-prefixed and targets `<eos>`-suffixed, so both
/// rows of an example have `summary_len + 1` live entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub source: Vec<Vec<usize>>,
    pub source_lens: Vec<usize>,
    pub summary_input: Vec<Vec<usize>>,
    pub summary_target: Vec<Vec<usize>>,
    pub summary_lens: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(examples: &[&EncodedExample]) -> Self {
        let max_src = examples.iter().map(|e| e.source.len()).max().unwrap_or(0);
        let max_sum = examples.iter().map(|e| e.summary.len() + 1).max().unwrap_or(0);
        let pad = |mut v: Vec<usize>, n: usize| {
            v.resize(n, PAD);
            v
        };
        let mut b = Batch {
            source: Vec::new(),
            source_lens: Vec::new(),
            summary_input: Vec::new(),
            summary_target: Vec::new(),
            summary_lens: Vec::new(),
            labels: Vec::new(),
        };
        for e in examples {
            b.source.push(pad(e.source.clone(), max_src));
            b.source_lens.push(e.source.len());
            let mut input = vec![BOS];
            input.extend(&e.summary);
            let mut target = e.summary.clone();
            target.push(EOS);
            b.summary_input.push(pad(input, max_sum));
            b.summary_target.push(pad(target, max_sum));
            b.summary_lens.push(e.summary.len() + 1);
            b.labels.push(e.label);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn source(&self, i: usize) -> &[usize] {
        &self.source[i][..self.source_lens[i]]
    }

    pub fn input(&self, i: usize) -> &[usize] {
        &self.summary_input[i][..self.summary_lens[i]]
    }

    pub fn target(&self, i: usize) -> &[usize] {
        &self.summary_target[i][..self.summary_lens[i]]
    }

    /// Appends `extra` padding columns to every id matrix.
    pub fn with_extra_padding(mut self, extra: usize) -> Self {
        for row in self
            .source
            .iter_mut()
            .chain(&mut self.summary_input)
            .chain(&mut self.summary_target)
        {
            row.extend(std::iter::repeat_n(PAD, extra));
        }
        self
    }
}

/// Groups `examples` into batches of `batch_size`, shuffled by `rng` when given.
/// The final short batch is kept.
pub fn make_batches<R: Rng>(examples: &[EncodedExample], batch_size: usize, rng: Option<&mut R>) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut order: Vec<&EncodedExample> = examples.iter().collect();
    if let Some(rng) = rng {
        order.shuffle(rng);
    }
    order.chunks(batch_size).map(Batch::new).collect()
}
