//! Accuracy and AUROC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Present only for binary tasks where both classes occur.
    pub auroc: Option<f64>,
    pub n_examples: usize,
}

impl EvalReport {
    /// Build a report from per-class probabilities. For two classes the
    /// class-1 probability is the AUROC score.
    pub fn from_scores(class_scores: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Self> {
        let predictions: Vec<usize> = class_scores.iter().map(|row| argmax(row)).collect();
        let accuracy = accuracy(&predictions, labels)?;
        let auroc = if num_classes == 2 {
            let pos: Vec<f64> = class_scores.iter().map(|row| row[1]).collect();
            match auroc(&pos, labels) {
                Ok(a) => Some(a),
                Err(Error::UndefinedMetric(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(Self {
            accuracy,
            auroc,
            n_examples: labels.len(),
        })
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::shape("accuracy of an empty set"));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(s+ > s-) + P(s+ = s-) / 2`.
///
/// Scores are sorted once and tie groups are walked in order, accumulating
/// twice the statistic as an integer. The result is therefore identical to an
/// all-pairs count divided by the same denominator.
pub fn auroc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::shape(format!("auroc needs 0/1 labels, got {bad}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("auroc score is NaN".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric("auroc needs both classes present".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));

    let mut twice_u: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]];
        let mut j = i;
        let (mut pos_group, mut neg_group) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == value {
            if labels[order[j]] == 1 {
                pos_group += 1;
            } else {
                neg_group += 1;
            }
            j += 1;
        }
        twice_u += pos_group * (2 * negatives_below + neg_group);
        negatives_below += neg_group;
        i = j;
    }
    Ok(twice_u as f64 / (2 * positives * negatives) as f64)
}
