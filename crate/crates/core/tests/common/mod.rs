#![allow(dead_code)]

use muse::model::ModelConfig;
use muse::sgraph::{higher_order_neighbor_sets, NeighborSets, Sign, SignedEdge, SignedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn edge(a: usize, b: usize, s: Sign) -> SignedEdge {
    SignedEdge::new(a, b, s)
}

/// Two positive 6-cliques `0..6` and `6..12` joined by 4 negative edges.
pub fn two_cliques() -> SignedGraph {
    let mut edges = Vec::new();
    for base in [0, 6] {
        for a in base..base + 6 {
            for b in a + 1..base + 6 {
                edges.push(edge(a, b, Sign::Positive));
            }
        }
    }
    for k in 0..4 {
        edges.push(edge(k, 6 + k, Sign::Negative));
    }
    SignedGraph::from_dense_edges(12, &edges)
}

/// Erdős–Rényi graph with independent fair signs.
pub fn random_graph(n: usize, p: f64, seed: u64) -> SignedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                let s = if rng.random::<bool>() { Sign::Positive } else { Sign::Negative };
                edges.push(edge(a, b, s));
            }
        }
    }
    SignedGraph::from_dense_edges(n, &edges)
}

/// Random graph guaranteed to hold at least one edge of each sign.
pub fn random_mixed_graph(n: usize, p: f64, seed: u64) -> SignedGraph {
    (seed..)
        .map(|s| random_graph(n, p, s))
        .find(|g| g.n_positive() > 0 && g.n_negative() > 0)
        .unwrap()
}

pub fn sets(g: &SignedGraph, order: usize) -> NeighborSets {
    higher_order_neighbor_sets(g, order, None, 0).unwrap()
}

pub fn small_config(facets: usize, facet_dim: usize, orders: usize) -> ModelConfig {
    ModelConfig {
        facets,
        facet_dim,
        orders,
        ..ModelConfig::default()
    }
}
