//! Structure-preserving loss, logistic sign predictor and the combined
//! training objective `L_ST + λ·L_SN`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::difftape::{sigmoid, ParamStore, Shape, Tape, TapeError, Tensor, Var};
use crate::model::glorot;
use crate::sgraph::{Sign, SignedEdge};
use crate::Scalar;

pub const PREDICTOR_WEIGHT: &str = "predictor.weight";
pub const PREDICTOR_BIAS: &str = "predictor.bias";

/// Saturated probabilities are clamped to `[PROB_FLOOR, 1 − PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("structure loss needs at least one {0} edge")]
    EmptyEdges(&'static str),
    #[error("predicted probability {0} outside (0, 1)")]
    Domain(f64),
    #[error("sign loss over an empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Tape(#[from] TapeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub lambda: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self { lambda: 4.0 }
    }
}

/// Logistic-regression weights over `[h_i ‖ h_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorParams<T> {
    /// Length `2·M·D`.
    pub weight: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> PredictorParams<T> {
    pub fn from_store(store: &ParamStore<T>) -> Result<Self, ObjectiveError> {
        Ok(Self {
            weight: store.value(PREDICTOR_WEIGHT)?.data().to_vec(),
            bias: store.value(PREDICTOR_BIAS)?.data()[0],
        })
    }
}

/// Registers `W_L` (Glorot uniform) and `b = 0` for embeddings of `width`.
pub fn init_predictor<T: Scalar>(store: &mut ParamStore<T>, width: usize, seed: u64) {
    store.insert(PREDICTOR_WEIGHT, glorot(PREDICTOR_WEIGHT, 2 * width, 1, 2 * width, 1, seed));
    store.insert(PREDICTOR_BIAS, Tensor::zeros(1, 1));
}

/// `sigmoid(W_Lᵀ[h_i ‖ h_j] + b)`, source first.
pub fn predict_sign<T: Scalar>(h_i: &[T], h_j: &[T], p: &PredictorParams<T>) -> Result<T, ObjectiveError> {
    if h_i.len() != h_j.len() || p.weight.len() != 2 * h_i.len() {
        return Err(TapeError::Dimension {
            op: "predict_sign",
            left: Shape::new(1, h_i.len() + h_j.len()),
            right: Shape::new(p.weight.len(), 1),
        }
        .into());
    }
    let logit = h_i
        .iter()
        .chain(h_j)
        .zip(&p.weight)
        .fold(p.bias, |acc, (&x, &w)| acc + w * x);
    Ok(sigmoid(logit))
}

/// [`predict_sign`] for every edge, in order.
pub fn score_edges<T: Scalar>(
    embeddings: &Tensor<T>,
    p: &PredictorParams<T>,
    edges: &[SignedEdge],
) -> Result<Vec<T>, ObjectiveError> {
    edges
        .iter()
        .map(|e| predict_sign(embeddings.row(e.src), embeddings.row(e.dst), p))
        .collect()
}

/// Mean cross-entropy of `(ŷ, y)` pairs. Every `ŷ` must be strictly inside
/// `(0, 1)`; nothing is clamped here.
pub fn sign_loss<T: Scalar>(pairs: &[(T, T)]) -> Result<T, ObjectiveError> {
    if pairs.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let mut total = T::zero();
    for &(p, y) in pairs {
        if !(p > T::zero() && p < T::one()) {
            return Err(ObjectiveError::Domain(p.as_f64()));
        }
        total += y * p.ln() + (T::one() - y) * (T::one() - p).ln();
    }
    Ok(-total / T::from_usize(pairs.len()).unwrap())
}

/// Mean squared distance over positive pairs minus that over negative pairs.
pub fn structure_loss<T: Scalar>(
    embeddings: &Tensor<T>,
    positive: &[SignedEdge],
    negative: &[SignedEdge],
) -> Result<T, ObjectiveError> {
    let mean = |edges: &[SignedEdge], label: &'static str| -> Result<T, ObjectiveError> {
        if edges.is_empty() {
            return Err(ObjectiveError::EmptyEdges(label));
        }
        let sum = edges.iter().fold(T::zero(), |acc, e| {
            acc + embeddings
                .row(e.src)
                .iter()
                .zip(embeddings.row(e.dst))
                .fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b))
        });
        Ok(sum / T::from_usize(edges.len()).unwrap())
    };
    Ok(mean(positive, "positive")? - mean(negative, "negative")?)
}

/// `L_ST + λ·L_SN`.
pub fn total_loss<T: Scalar>(structure: T, sign: T, cfg: &ObjectiveConfig) -> T {
    structure + T::lit(cfg.lambda) * sign
}

/// `1` for positive edges, `0` otherwise.
pub fn label(sign: Sign) -> f64 {
    if sign.is_positive() {
        1.0
    } else {
        0.0
    }
}

fn endpoints(edges: &[SignedEdge]) -> (Arc<[usize]>, Arc<[usize]>) {
    (
        edges.iter().map(|e| e.src).collect(),
        edges.iter().map(|e| e.dst).collect(),
    )
}

/// Mean squared endpoint distance of `edges`, recorded on the tape.
pub fn mean_squared_distance<T: Scalar>(tape: &mut Tape<T>, embeddings: Var, edges: &[SignedEdge]) -> Result<Var, TapeError> {
    let (src, dst) = endpoints(edges);
    let a = tape.gather_rows(embeddings, src)?;
    let b = tape.gather_rows(embeddings, dst)?;
    let d = tape.squared_l2_distance(a, b)?;
    let s = tape.reduce_sum(d);
    Ok(tape.scale(s, T::one() / T::from_usize(edges.len().max(1)).unwrap()))
}

/// Tape version of [`structure_loss`].
pub fn structure_loss_var<T: Scalar>(
    tape: &mut Tape<T>,
    embeddings: Var,
    positive: &[SignedEdge],
    negative: &[SignedEdge],
) -> Result<Var, ObjectiveError> {
    if positive.is_empty() {
        return Err(ObjectiveError::EmptyEdges("positive"));
    }
    if negative.is_empty() {
        return Err(ObjectiveError::EmptyEdges("negative"));
    }
    let pos = mean_squared_distance(tape, embeddings, positive)?;
    let neg = mean_squared_distance(tape, embeddings, negative)?;
    Ok(tape.sub(pos, neg)?)
}

/// Predicted positive-link probabilities for `edges`, a column.
pub fn predict_sign_var<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    embeddings: Var,
    edges: &[SignedEdge],
) -> Result<Var, ObjectiveError> {
    let (src, dst) = endpoints(edges);
    let a = tape.gather_rows(embeddings, src)?;
    let b = tape.gather_rows(embeddings, dst)?;
    let pair = tape.concat_cols(a, b)?;
    let w = tape.param(store, PREDICTOR_WEIGHT)?;
    let bias = tape.param(store, PREDICTOR_BIAS)?;
    let ones = tape.constant(Tensor::ones(edges.len(), 1));
    let shift = tape.matmul(ones, bias)?;
    let logits = tape.matmul(pair, w)?;
    let logits = tape.add(logits, shift)?;
    Ok(tape.sigmoid(logits))
}

/// Tape version of [`sign_loss`] on the predictor's output for `edges`.
pub fn sign_loss_var<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    embeddings: Var,
    edges: &[SignedEdge],
) -> Result<Var, ObjectiveError> {
    if edges.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let probs = predict_sign_var(tape, store, embeddings, edges)?;
    let labels: Arc<[T]> = edges.iter().map(|e| T::lit(label(e.sign))).collect();
    Ok(tape.binary_cross_entropy(probs, labels, T::lit(PROB_FLOOR))?)
}

/// Loss nodes of one batch.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    pub structure: Var,
    pub sign: Var,
}

/// Records `L_ST + λ·L_SN` over `edges`.
///
/// With `lenient`, a sign class missing from `edges` drops its structure
/// term instead of failing; used for per-node update batches.
pub fn objective_var<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    embeddings: Var,
    edges: &[SignedEdge],
    cfg: &ObjectiveConfig,
    lenient: bool,
) -> Result<LossVars, ObjectiveError> {
    let positive: Vec<SignedEdge> = edges.iter().copied().filter(|e| e.sign.is_positive()).collect();
    let negative: Vec<SignedEdge> = edges.iter().copied().filter(|e| !e.sign.is_positive()).collect();
    let structure = if lenient && (positive.is_empty() || negative.is_empty()) {
        match (positive.is_empty(), negative.is_empty()) {
            (false, true) => mean_squared_distance(tape, embeddings, &positive)?,
            (true, false) => {
                let d = mean_squared_distance(tape, embeddings, &negative)?;
                tape.scale(d, -T::one())
            }
            _ => tape.constant(Tensor::zeros(1, 1)),
        }
    } else {
        structure_loss_var(tape, embeddings, &positive, &negative)?
    };
    let sign = sign_loss_var(tape, store, embeddings, edges)?;
    let weighted = tape.scale(sign, T::lit(cfg.lambda));
    let total = tape.add(structure, weighted)?;
    Ok(LossVars { total, structure, sign })
}
