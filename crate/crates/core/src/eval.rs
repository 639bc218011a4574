// SPDX-License-Identifier: Apache-2.0

//! Classification metrics with defective (1) as the positive class.
//!
//! Ratios whose denominator is zero are reported as 0. PR-AUC is the
//! step-wise (average precision) sum over distinct score thresholds.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("predictions ({preds}) and labels ({labels}) differ in length")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("nothing to evaluate")]
    EmptyMatrix,
    #[error("PR-AUC needs at least one positive label")]
    NoPositives,
    #[error("score {0} is not a finite probability")]
    BadScore(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One operating point of the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pr_auc: f64,
    /// Sorted by recall, ascending.
    pub pr_points: Vec<PrPoint>,
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in preds.iter().zip(labels) {
        match (p != 0, l != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<ClassMetrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassMetrics {
        accuracy: ratio(cm.tp + cm.tn, total),
        precision,
        recall,
        f1,
    })
}

/// Precision and recall at every distinct score threshold, highest
/// threshold first (so recall is non-decreasing). Tied scores form one
/// threshold.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            preds: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::BadScore(i));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count() as u64;
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            recall: ratio(tp, positives),
            precision: ratio(tp, tp + fp),
        });
    }
    Ok(points)
}

/// Area under the precision-recall curve, `Σ (Rᵢ − Rᵢ₋₁)·Pᵢ` with R₀ = 0.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    Ok(area(&pr_curve(scores, labels)?))
}

fn area(points: &[PrPoint]) -> f64 {
    let mut prev = 0.0;
    let mut sum = 0.0;
    for p in points {
        sum += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    sum
}

/// Thresholds the scores (class 1 iff score ≥ `threshold`) and computes
/// every metric. The PR curve is left empty when there are no positives.
pub fn evaluate(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport, EvalError> {
    let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
    let cm = confusion(&preds, labels)?;
    let m = metrics(&cm)?;
    let (pr_auc, pr_points) = match pr_curve(scores, labels) {
        Ok(points) => (area(&points), points),
        Err(EvalError::NoPositives) => (0.0, Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        confusion: cm,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        pr_auc,
        pr_points,
    })
}
