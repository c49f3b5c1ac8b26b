//! Classification metrics and checkpoint-curve summaries.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Per-class hit and total counts accumulated from prediction pairs.
#[derive(Debug, Clone, Default)]
pub struct ConfusionCounts {
    per_class: BTreeMap<u32, (usize, usize)>,
}

impl ConfusionCounts {
    /// Creates an empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one `(prediction, truth)` pair.
    pub fn record(&mut self, prediction: u32, truth: u32) {
        let entry = self.per_class.entry(truth).or_insert((0, 0));
        entry.1 += 1;
        if prediction == truth {
            entry.0 += 1;
        }
    }

    /// Total number of recorded pairs.
    pub fn total(&self) -> usize {
        self.per_class.values().map(|&(_, t)| t).sum()
    }

    /// Fraction of all predictions that were correct.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyInput {
                context: "accuracy over zero predictions",
            });
        }
        let hits: usize = self.per_class.values().map(|&(h, _)| h).sum();
        Ok(hits as f64 / total as f64)
    }

    /// Mean per-class recall over the classes present in the truth labels.
    pub fn balanced_accuracy(&self) -> Result<f64> {
        if self.per_class.is_empty() {
            return Err(Error::EmptyInput {
                context: "balanced accuracy over zero predictions",
            });
        }
        let recall_sum: f64 = self
            .per_class
            .values()
            .map(|&(h, t)| h as f64 / t as f64)
            .sum();
        Ok(recall_sum / self.per_class.len() as f64)
    }
}

fn counts_from(predictions: &[u32], truth: &[u32]) -> Result<ConfusionCounts> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "metric inputs",
            expected: format!("{} predictions", truth.len()),
            got: format!("{}", predictions.len()),
        });
    }
    let mut counts = ConfusionCounts::new();
    for (&p, &t) in predictions.iter().zip(truth) {
        counts.record(p, t);
    }
    Ok(counts)
}

/// Fraction of predictions equal to the truth labels.
pub fn accuracy(predictions: &[u32], truth: &[u32]) -> Result<f64> {
    counts_from(predictions, truth)?.accuracy()
}

/// Mean per-class recall, insensitive to class imbalance.
pub fn balanced_accuracy(predictions: &[u32], truth: &[u32]) -> Result<f64> {
    counts_from(predictions, truth)?.balanced_accuracy()
}

/// Trapezoid-rule area under a checkpoint curve, normalised by the
/// checkpoint span so a constant curve integrates to its own value.
///
/// Checkpoints must be strictly increasing and at least two points long.
pub fn auc_curve(checkpoints: &[f64], scores: &[f64]) -> Result<f64> {
    if checkpoints.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "checkpoint curve",
            expected: format!("{} scores", checkpoints.len()),
            got: format!("{}", scores.len()),
        });
    }
    if checkpoints.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "checkpoints",
            reason: format!(
                "area needs at least two checkpoints, got {}",
                checkpoints.len()
            ),
        });
    }
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "checkpoints",
            reason: "checkpoints must be strictly increasing".to_string(),
        });
    }
    let mut area = 0.0;
    for i in 1..checkpoints.len() {
        area += 0.5 * (scores[i] + scores[i - 1]) * (checkpoints[i] - checkpoints[i - 1]);
    }
    Ok(area / (checkpoints[checkpoints.len() - 1] - checkpoints[0]))
}
