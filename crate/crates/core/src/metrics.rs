//! Link-sign evaluation: binary F1 on the positive class and ROC AUC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Decision threshold for F1.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no predictions to score")]
    Empty,
    #[error("AUC needs both classes (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score at position {0} is NaN")]
    NaN(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR/(P+R)`, zero when `P + R = 0`.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn check<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(p) = scores.iter().position(|s| s.is_nan()) {
        return Err(MetricError::NaN(p));
    }
    Ok(())
}

/// Predicts positive when `score ≥ threshold`.
pub fn f1_binary<T: Scalar>(scores: &[T], labels: &[bool], threshold: T) -> Result<(f64, Confusion), MetricError> {
    check(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok((c.f1(), c))
}

/// Mann–Whitney AUC with ties credited one half.
///
/// Sorts once and counts, per tie group, the negatives strictly below; the
/// win count is kept as an integer of half-units so the ratio is exact up
/// to the final division.
pub fn auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64, MetricError> {
    check(scores, labels)?;
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN rejected above"));

    let mut half_wins: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let (mut pos, mut neg) = (0u128, 0u128);
        for &idx in &order[start..end] {
            if labels[idx] {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        half_wins += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }
    Ok(half_wins as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Link-sign prediction results on a held-out edge set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f1: f64,
    pub auc: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_test: usize,
    pub threshold: f64,
    /// F1 flavor; always `binary-positive` for now.
    pub f1_mode: String,
}

/// F1 at [`DEFAULT_THRESHOLD`] plus AUC.
pub fn evaluate<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<EvalReport, MetricError> {
    evaluate_at(scores, labels, DEFAULT_THRESHOLD)
}

pub fn evaluate_at<T: Scalar>(scores: &[T], labels: &[bool], threshold: f64) -> Result<EvalReport, MetricError> {
    let (f1, c) = f1_binary(scores, labels, T::lit(threshold))?;
    let auc = auc(scores, labels)?;
    Ok(EvalReport {
        f1,
        auc,
        tp: c.tp,
        fp: c.fp,
        tn: c.tn,
        fn_: c.fn_,
        n_test: c.total(),
        threshold,
        f1_mode: "binary-positive".to_owned(),
    })
}
