//! Per-node evaluation of the attention, aggregation and composition steps
//! on plain tensors. The tape forward in [`super::Muse`] computes the same
//! quantities for all nodes at once.

use super::config::{attention_vector_name, transform_name, ModelConfig};
use super::ModelError;
use crate::difftape::{ParamStore, Shape, TapeError, Tensor};
use crate::sgraph::{NeighborClass, NeighborSets};
use crate::Scalar;

/// Attention weights of one (order, class).
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<T> {
    /// `D x D`.
    pub transform: Tensor<T>,
    /// `2D x 1`; first half scores the query facet, second half the key facet.
    pub vector: Tensor<T>,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn from_store(
        store: &ParamStore<T>,
        cfg: &ModelConfig,
        order: usize,
        class: NeighborClass,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            transform: store.value(&transform_name(cfg, order, class))?.clone(),
            vector: store.value(&attention_vector_name(cfg, order, class))?.clone(),
        })
    }

    fn facet_dim(&self) -> usize {
        self.transform.rows()
    }
}

fn dim_err(op: &'static str, left: Shape, right: Shape) -> ModelError {
    ModelError::Tape(TapeError::Dimension { op, left, right })
}

fn transform_rows<T: Scalar>(facets: &Tensor<T>, transform: &Tensor<T>) -> Vec<Vec<T>> {
    (0..facets.rows())
        .map(|m| {
            (0..transform.rows())
                .map(|r| {
                    transform
                        .row(r)
                        .iter()
                        .zip(facets.row(m))
                        .fold(T::zero(), |acc, (&w, &x)| acc + w * x)
                })
                .collect()
        })
        .collect()
}

/// Facet attention of node `i` (query facets) on node `j` (key facets).
///
/// `α_m ∝ Σ_s exp(LeakyReLU(aᵀ [W h_im ‖ W h_js]))`, normalized over `m`.
pub fn attention_weights<T: Scalar>(
    query: &Tensor<T>,
    key: &Tensor<T>,
    params: &AttentionParams<T>,
    slope: T,
) -> Result<Vec<T>, ModelError> {
    let d = params.facet_dim();
    let (qs, ks) = (query.shape(), key.shape());
    if qs != ks || qs.cols != d || qs.rows == 0 {
        return Err(dim_err("attention_weights", qs, ks));
    }
    if params.transform.shape() != Shape::new(d, d) || params.vector.shape() != Shape::new(2 * d, 1) {
        return Err(dim_err("attention_weights", params.transform.shape(), params.vector.shape()));
    }
    let m = qs.rows;
    let tq = transform_rows(query, &params.transform);
    let tk = transform_rows(key, &params.transform);
    let a = params.vector.data();
    let mut logits = Vec::with_capacity(m * m);
    for q in &tq {
        for k in &tk {
            let score = q
                .iter()
                .chain(k)
                .zip(a)
                .fold(T::zero(), |acc, (&x, &w)| acc + w * x);
            logits.push(if score > T::zero() { score } else { slope * score });
        }
    }
    let max = logits.iter().fold(T::neg_infinity(), |acc, &x| acc.max(x));
    let exps: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total = exps.iter().fold(T::zero(), |acc, &x| acc + x);
    Ok(exps
        .chunks(m)
        .map(|row| row.iter().fold(T::zero(), |acc, &x| acc + x) / total)
        .collect())
}

/// `prev + Σ_{j ∈ set(i,l)} [α_ij1 h⁰_j1 ‖ … ‖ α_ijM h⁰_jM]` with the
/// query taken from `prev` and keys/values from the initial embeddings.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_order<T: Scalar>(
    i: usize,
    order: usize,
    class: NeighborClass,
    sets: &NeighborSets,
    initial: &Tensor<T>,
    prev: &[T],
    params: &AttentionParams<T>,
    cfg: &ModelConfig,
) -> Result<Vec<T>, ModelError> {
    let (m, d) = (cfg.facets, cfg.facet_dim);
    if prev.len() != m * d || initial.cols() != m * d {
        return Err(dim_err(
            "aggregate_order",
            Shape::new(1, prev.len()),
            initial.shape(),
        ));
    }
    if sets.order() < order {
        return Err(ModelError::Order { have: sets.order(), need: order });
    }
    let slope = T::lit(cfg.leaky_slope);
    let query = Tensor::from_raw(m, d, prev.to_vec());
    let mut out = prev.to_vec();
    for &j in sets.get(i, order, class) {
        let key = Tensor::from_raw(m, d, initial.row(j).to_vec());
        let alpha = attention_weights(&query, &key, params, slope)?;
        for (f, &w) in alpha.iter().enumerate() {
            for c in f * d..(f + 1) * d {
                out[c] += w * key.data()[c];
            }
        }
    }
    Ok(out)
}

/// `tanh(W_BUᵀ [h_B ‖ h_U])`.
pub fn compose<T: Scalar>(balanced: &[T], unbalanced: &[T], composite: &Tensor<T>) -> Result<Vec<T>, ModelError> {
    let width = balanced.len();
    if unbalanced.len() != width || composite.shape() != Shape::new(2 * width, width) {
        return Err(dim_err(
            "compose",
            Shape::new(1, balanced.len() + unbalanced.len()),
            composite.shape(),
        ));
    }
    let input: Vec<T> = balanced.iter().chain(unbalanced).copied().collect();
    Ok((0..width)
        .map(|c| {
            input
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (r, &x)| acc + x * composite.get(r, c))
                .tanh()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, transform: Vec<f64>, vector: Vec<f64>) -> AttentionParams<f64> {
        AttentionParams {
            transform: Tensor::new(d, d, transform).unwrap(),
            vector: Tensor::new(2 * d, 1, vector).unwrap(),
        }
    }

    #[test]
    fn zero_vector_gives_uniform_weights() {
        let p = params(2, vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]);
        let q = Tensor::new(3, 2, vec![1.0, -2.0, 0.5, 0.1, 3.0, 3.0]).unwrap();
        let k = Tensor::new(3, 2, vec![0.0, 1.0, 1.0, 0.0, -1.0, -1.0]).unwrap();
        for a in attention_weights(&q, &k, &p, 0.2).unwrap() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_facet_weight_is_one() {
        let p = params(2, vec![1.0, 2.0, 3.0, 4.0], vec![0.3, -0.1, 2.0, 0.7]);
        let q = Tensor::new(1, 2, vec![1.0, -2.0]).unwrap();
        let k = Tensor::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(attention_weights(&q, &k, &p, 0.2).unwrap(), vec![1.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = params(2, vec![0.0; 4], vec![0.0; 4]);
        let q = Tensor::new(2, 2, vec![0.0; 4]).unwrap();
        let k = Tensor::new(3, 2, vec![0.0; 6]).unwrap();
        assert!(matches!(
            attention_weights(&q, &k, &p, 0.2),
            Err(ModelError::Tape(TapeError::Dimension { .. }))
        ));
    }

    #[test]
    fn compose_zero_weights_and_range() {
        let w = Tensor::<f64>::zeros(4, 2);
        assert_eq!(compose(&[1.0, 2.0], &[3.0, 4.0], &w).unwrap(), vec![0.0, 0.0]);
        let w = Tensor::<f64>::filled(4, 2, 0.5);
        for x in compose(&[1.0, 2.0], &[3.0, -4.0], &w).unwrap() {
            assert!(x > -1.0 && x < 1.0);
        }
        assert!(compose(&[1.0], &[3.0, 4.0], &w).is_err());
    }
}
