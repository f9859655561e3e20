use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::tokenize::tokenize;
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 5;

/// One corpus line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub text: String,
    pub summary: String,
    pub label: i64,
}

/// A tokenized (text, summary, rating) triple. `label` is the 1-based rating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReviewExample {
    pub text: Vec<String>,
    pub summary: Vec<String>,
    pub label: u8,
}

impl ReviewExample {
    pub fn from_record(rec: &RawRecord) -> std::result::Result<Self, String> {
        let text = tokenize(&rec.text);
        let summary = tokenize(&rec.summary);
        if text.is_empty() {
            return Err("empty text".into());
        }
        if summary.is_empty() {
            return Err("empty summary".into());
        }
        if !(1..=NUM_CLASSES as i64).contains(&rec.label) {
            return Err(format!("label {} outside 1..={NUM_CLASSES}", rec.label));
        }
        Ok(ReviewExample {
            text,
            summary,
            label: rec.label as u8,
        })
    }

    /// Zero-based class index.
    pub fn class(&self) -> usize {
        self.label as usize - 1
    }
}

/// Parses line-delimited records. Every malformed line is reported; the
/// first one becomes the error.
pub fn parse_corpus(reader: impl BufRead, source: &str) -> Result<Vec<ReviewExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| Error::Malformed {
            path: source.to_string(),
            line: i + 1,
            msg,
        };
        let rec: RawRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        out.push(ReviewExample::from_record(&rec).map_err(malformed)?);
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<ReviewExample>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_corpus(BufReader::new(file), &path.display().to_string())
}

pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub validation: Vec<ReviewExample>,
    pub test: Vec<ReviewExample>,
    pub train: Vec<ReviewExample>,
}

impl Splits {
    pub fn get(&self, name: &str) -> Option<&[ReviewExample]> {
        match name {
            "validation" | "valid" | "val" => Some(&self.validation),
            "test" => Some(&self.test),
            "train" => Some(&self.train),
            _ => None,
        }
    }
}

/// Prefix split in corpus order: the first `split_size` examples validate,
/// the next `split_size` test, the rest train.
pub fn split(corpus: Vec<ReviewExample>, split_size: usize) -> Result<Splits> {
    if split_size == 0 {
        return Err(Error::Ingest("split size must be positive".into()));
    }
    if corpus.len() <= 2 * split_size {
        return Err(Error::Ingest(format!(
            "corpus of {} examples is too small for two held-out splits of {split_size}",
            corpus.len()
        )));
    }
    let mut validation = corpus;
    let mut test = validation.split_off(split_size);
    let train = test.split_off(split_size);
    Ok(Splits {
        validation,
        test,
        train,
    })
}
