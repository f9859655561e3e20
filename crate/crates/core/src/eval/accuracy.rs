use crate::error::{Error, Result};

/// Fraction of exact rating matches.
pub fn accuracy_5class(predictions: &[u8], gold: &[u8]) -> Result<f64> {
    check(predictions, gold)?;
    let hits = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Negative,
    Neutral,
    Positive,
}

pub fn polarity(rating: u8) -> Polarity {
    match rating {
        0..=2 => Polarity::Negative,
        3 => Polarity::Neutral,
        _ => Polarity::Positive,
    }
}

/// Binary accuracy over examples with a non-neutral gold rating; `None` when
/// every gold rating is 3. A predicted 3 on an included example is wrong.
pub fn accuracy_2class(predictions: &[u8], gold: &[u8]) -> Result<Option<f64>> {
    check(predictions, gold)?;
    let (mut hits, mut total) = (0usize, 0usize);
    for (&p, &g) in predictions.iter().zip(gold) {
        let gp = polarity(g);
        if gp == Polarity::Neutral {
            continue;
        }
        total += 1;
        if polarity(p) == gp {
            hits += 1;
        }
    }
    Ok((total > 0).then(|| hits as f64 / total as f64))
}

fn check(predictions: &[u8], gold: &[u8]) -> Result<()> {
    if gold.is_empty() {
        return Err(Error::dim("accuracy", "no examples"));
    }
    if predictions.len() != gold.len() {
        return Err(Error::dim(
            "accuracy",
            format!("{} predictions for {} labels", predictions.len(), gold.len()),
        ));
    }
    Ok(())
}
