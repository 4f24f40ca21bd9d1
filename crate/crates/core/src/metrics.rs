//! Example-based multilabel metrics: Jaccard ("simple") accuracy, exact-match
//! classification accuracy and F1, each averaged over samples.
//!
//! A sample whose truth and prediction are both empty scores 1 on every metric.

use crate::data::LabelVector;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Probabilistic outputs and their thresholded label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub probs: Vec<Vec<f64>>,
    pub threshold: f64,
    pub binarized: Vec<LabelVector>,
}

impl PredictionSet {
    pub fn new(probs: Vec<Vec<f64>>, threshold: f64) -> Self {
        let binarized = binarize(&probs, threshold);
        Self {
            probs,
            threshold,
            binarized,
        }
    }
}

pub fn binarize(probs: &[Vec<f64>], threshold: f64) -> Vec<LabelVector> {
    probs
        .iter()
        .map(|row| LabelVector::from_bits(row.iter().map(|&p| p >= threshold).collect()))
        .collect()
}

/// Per-sample (|Y∩Z|, |Y∪Z|, |Y|+|Z|).
fn overlap(y: &LabelVector, z: &LabelVector) -> (usize, usize, usize) {
    let mut inter = 0;
    let mut union = 0;
    let mut sizes = 0;
    for (&a, &b) in y.bits().iter().zip(z.bits()) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
        sizes += a as usize + b as usize;
    }
    (inter, union, sizes)
}

fn mean_over(
    preds: &[LabelVector],
    truth: &[LabelVector],
    per_sample: impl Fn(usize, usize, usize) -> f64,
) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} samples",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (z, y) in preds.iter().zip(truth) {
        if z.len() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "prediction has {} labels, truth has {}",
                z.len(),
                y.len()
            )));
        }
        let (inter, union, sizes) = overlap(y, z);
        total += per_sample(inter, union, sizes);
    }
    Ok(total / preds.len() as f64)
}

/// Mean of `|Y∩Z| / |Y∪Z|`.
pub fn simple_accuracy(preds: &[LabelVector], truth: &[LabelVector]) -> Result<f64> {
    mean_over(preds, truth, |inter, union, _| {
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    })
}

/// Fraction of samples predicted exactly.
pub fn classification_accuracy(preds: &[LabelVector], truth: &[LabelVector]) -> Result<f64> {
    mean_over(preds, truth, |inter, union, _| (inter == union) as u8 as f64)
}

/// Mean of `2|Y∩Z| / (|Y|+|Z|)`.
pub fn f1_score(preds: &[LabelVector], truth: &[LabelVector]) -> Result<f64> {
    mean_over(preds, truth, |inter, _, sizes| {
        if sizes == 0 {
            1.0
        } else {
            2.0 * inter as f64 / sizes as f64
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub f1: f64,
    pub accuracy: f64,
    pub classification_accuracy: f64,
}

pub fn score(preds: &[LabelVector], truth: &[LabelVector]) -> Result<Scores> {
    Ok(Scores {
        f1: f1_score(preds, truth)?,
        accuracy: simple_accuracy(preds, truth)?,
        classification_accuracy: classification_accuracy(preds, truth)?,
    })
}
