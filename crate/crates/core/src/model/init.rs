use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::config::{attention_vector_name, composite_name, transform_name, ModelConfig, EMBEDDING};
use crate::difftape::{ParamStore, Tensor};
use crate::seed::{hash_str, keyed_rng};
use crate::sgraph::{IdMap, NeighborClass};
use crate::Scalar;

/// Initial facet embeddings for the nodes of `ids`, `n x (M·D)`.
///
/// Each row is drawn from N(0, 1/√D) with a stream keyed by the node's raw
/// id, so a node keeps its initial vector under any relabeling.
pub fn init_embeddings_for<T: Scalar>(ids: &IdMap, cfg: &ModelConfig, seed: u64) -> Tensor<T> {
    let width = cfg.width();
    let std = 1.0 / (cfg.facet_dim as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let mut data = Vec::with_capacity(ids.len() * width);
    for raw in ids.raw_ids() {
        let mut rng = keyed_rng(seed, &[hash_str(EMBEDDING), hash_str(raw)]);
        data.extend((0..width).map(|_| T::lit(normal.sample(&mut rng))));
    }
    Tensor::from_raw(ids.len(), width, data)
}

/// [`init_embeddings_for`] with nodes named `"0".."n-1"`.
pub fn init_embeddings<T: Scalar>(n: usize, cfg: &ModelConfig, seed: u64) -> Tensor<T> {
    init_embeddings_for(&IdMap::identity(n), cfg, seed)
}

/// Uniform in ±√(6/(fan_in+fan_out)), stream keyed by parameter name.
pub fn glorot<T: Scalar>(name: &str, rows: usize, cols: usize, fan_in: usize, fan_out: usize, seed: u64) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let mut rng = keyed_rng(seed, &[hash_str(name)]);
    Tensor::from_fn(rows, cols, |_, _| T::lit(rng.sample(dist)))
}

/// Registers the embedding table and every attention / composite weight.
pub fn init_model_params<T: Scalar>(store: &mut ParamStore<T>, ids: &IdMap, cfg: &ModelConfig, seed: u64) {
    let d = cfg.facet_dim;
    let width = cfg.width();
    store.insert(EMBEDDING, init_embeddings_for(ids, cfg, seed));
    for l in 1..=cfg.orders {
        for class in NeighborClass::BOTH {
            let t = transform_name(cfg, l, class);
            if !store.contains(&t) {
                store.insert(t.clone(), glorot(&t, d, d, d, d, seed));
                let a = attention_vector_name(cfg, l, class);
                store.insert(a.clone(), glorot(&a, 2 * d, 1, 2 * d, 1, seed));
            }
        }
        let c = composite_name(l);
        store.insert(c.clone(), glorot(&c, 2 * width, width, 2 * width, width, seed));
    }
}
