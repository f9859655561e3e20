//! Corpus ingestion, vocabulary, splitting and batching.

pub mod batch;
pub mod corpus;
pub mod synthetic;
pub mod tokenize;
pub mod vocab;

pub use batch::{encode_all, make_batches, Batch, EncodedExample};
pub use corpus::{read_corpus, split, write_records, RawRecord, ReviewExample, Splits, NUM_CLASSES};
pub use tokenize::{detokenize, tokenize};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};
