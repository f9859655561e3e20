//! Templated product reviews for desk-scale runs.
//!
//! The rating is drawn uniformly from 1..=5 and selects the sentiment-word
//! inventory. The summary pairs a sentiment word from the text with the
//! reviewed product, so a good model has to both copy content words and
//! read the sentiment.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::corpus::RawRecord;
use crate::rng::{stream, Stream};

const PRODUCTS: &[&str] = &[
    "puzzle", "doll", "truck", "kite", "robot", "ball", "train", "blocks", "drone", "game",
    "scooter", "tent", "bike", "helmet", "camera", "lamp", "backpack", "bottle",
];

const PEOPLE: &[&str] = &["son", "daughter", "nephew", "niece", "kids", "grandson", "wife", "husband", "friend"];

const COLORS: &[&str] = &["red", "blue", "green", "yellow", "white", "black"];

const SENTIMENT: [&[&str]; 5] = [
    &["terrible", "awful", "horrible", "useless", "broken"],
    &["poor", "flimsy", "disappointing", "weak", "cheap"],
    &["okay", "average", "decent", "fine", "acceptable"],
    &["good", "nice", "solid", "sturdy", "fun"],
    &["excellent", "amazing", "perfect", "wonderful", "fantastic"],
];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty inventory")
}

pub fn generate_record<R: Rng>(rng: &mut R) -> RawRecord {
    let label: i64 = rng.gen_range(1..=5);
    let words = SENTIMENT[(label - 1) as usize];
    let product = pick(rng, PRODUCTS);
    let person = pick(rng, PEOPLE);
    let adj = pick(rng, words);
    let adj2 = pick(rng, words);

    let mut filler = vec![
        format!("the box was {} .", pick(rng, COLORS)),
        format!("it arrived {} .", pick(rng, &["yesterday", "last week", "on time", "early", "late"])),
        format!("my {person} has used it every day ."),
        format!("the {product} comes with {} extra parts .", rng.gen_range(2..=6)),
    ];
    filler.shuffle(rng);
    filler.truncate(rng.gen_range(1..=3));
    let at = rng.gen_range(0..=filler.len());
    filler.insert(at, format!("i bought this {product} for my {person} ."));

    let opinion = match rng.gen_range(0..3) {
        0 => format!("the {product} is {adj} ."),
        1 => format!("overall the {product} is {adj} and {adj2} ."),
        _ => format!("honestly this {product} was {adj} ."),
    };
    let at = rng.gen_range(0..=filler.len());
    filler.insert(at, opinion);

    let summary = match rng.gen_range(0..3) {
        0 => format!("{adj} {product}"),
        1 => format!("{adj} {product} !"),
        _ => format!("{adj} {product} for my {person}"),
    };
    RawRecord {
        text: filler.join(" "),
        summary,
        label,
    }
}

/// `n` records, fully determined by `seed`.
pub fn generate(seed: u64, n: usize) -> Vec<RawRecord> {
    let mut rng = stream(seed, Stream::Synthetic);
    (0..n).map(|_| generate_record(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::ReviewExample;

    #[test]
    fn deterministic_and_valid() {
        let a = generate(5, 100);
        assert_eq!(a, generate(5, 100));
        assert_ne!(a, generate(6, 100));
        for r in &a {
            assert!((1..=5).contains(&r.label));
            ReviewExample::from_record(r).unwrap();
        }
    }

    #[test]
    fn summary_words_come_from_text() {
        for r in generate(1, 200) {
            let text: Vec<&str> = r.text.split_whitespace().collect();
            for w in r.summary.split_whitespace().filter(|w| *w != "!") {
                assert!(text.contains(&w), "{w} missing from {}", r.text);
            }
        }
    }

    #[test]
    fn labels_are_roughly_uniform() {
        // Chi-squared with 4 degrees of freedom; 18.47 is the 0.999 quantile.
        let n = 5000;
        let mut counts = [0usize; 5];
        for r in generate(42, n) {
            counts[(r.label - 1) as usize] += 1;
        }
        let expected = n as f64 / 5.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 18.47, "chi2 = {chi2}, counts = {counts:?}");
    }
}
