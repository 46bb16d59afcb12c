use serde::Serialize;

use crate::dataset::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::UndefinedRate("accuracy")),
            n => Ok((self.tp + self.tn) as f64 / n as f64),
        }
    }

    pub fn precision(&self) -> Result<f64> {
        match self.tp + self.fp {
            0 => Err(Error::UndefinedRate("precision")),
            d => Ok(self.tp as f64 / d as f64),
        }
    }
}

pub fn confusion(labels: &[Label], predictions: &[Label]) -> Result<ConfusionCounts> {
    if labels.len() != predictions.len() {
        return Err(Error::Dimension(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&truth, &pred) in labels.iter().zip(predictions) {
        match (truth, pred) {
            (Label::Positive, Label::Positive) => c.tp += 1,
            (Label::Positive, Label::Negative) => c.fn_ += 1,
            (Label::Negative, Label::Negative) => c.tn += 1,
            (Label::Negative, Label::Positive) => c.fp += 1,
        }
    }
    Ok(c)
}

/// True-positive rate `TP / (TP + FN)`.
pub fn sensitivity(c: &ConfusionCounts) -> Result<f64> {
    match c.positives() {
        0 => Err(Error::UndefinedRate("sensitivity")),
        d => Ok(c.tp as f64 / d as f64),
    }
}

/// True-negative rate `TN / (TN + FP)`.
pub fn specificity(c: &ConfusionCounts) -> Result<f64> {
    match c.negatives() {
        0 => Err(Error::UndefinedRate("specificity")),
        d => Ok(c.tn as f64 / d as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    /// `None` when the rate is undefined (no positives / negatives).
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub confusion: ConfusionCounts,
}

/// One row per threshold, predicting positive iff `grade >= threshold`.
pub fn threshold_sweep(grades: &[f64], labels: &[Label], thresholds: &[f64]) -> Result<Vec<ThresholdRow>> {
    if grades.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} grades vs {} labels",
            grades.len(),
            labels.len()
        )));
    }
    thresholds
        .iter()
        .map(|&threshold| {
            let predictions: Vec<Label> = grades.iter().map(|&g| Label::from_decision(g >= threshold)).collect();
            let c = confusion(labels, &predictions)?;
            Ok(ThresholdRow {
                threshold,
                sensitivity: sensitivity(&c).ok(),
                specificity: specificity(&c).ok(),
                confusion: c,
            })
        })
        .collect()
}
