use rand::seq::SliceRandom;

use super::{GraphError, Sign, SignedEdge, SignedGraph};
use crate::seed::keyed_rng;

/// Stratified train/test partition of a graph's edges, one entry per
/// unordered pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train: Vec<SignedEdge>,
    pub test: Vec<SignedEdge>,
    pub seed: u64,
}

impl EdgeSplit {
    pub fn train_positive(&self) -> impl Iterator<Item = &SignedEdge> {
        self.train.iter().filter(|e| e.sign == Sign::Positive)
    }

    pub fn train_negative(&self) -> impl Iterator<Item = &SignedEdge> {
        self.train.iter().filter(|e| e.sign == Sign::Negative)
    }
}

/// Shuffles positive and negative edges separately and keeps
/// `round(train_fraction · count)` of each class for training.
pub fn split_edges(g: &SignedGraph, train_fraction: f64, seed: u64) -> Result<EdgeSplit, GraphError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(GraphError::Split(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let edges = g.edges();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for sign in [Sign::Positive, Sign::Negative] {
        let mut class: Vec<SignedEdge> = edges.iter().copied().filter(|e| e.sign == sign).collect();
        if class.len() < 2 {
            return Err(GraphError::Split(format!(
                "{} {} edge(s); need at least 2 per sign to stratify",
                class.len(),
                if sign.is_positive() { "positive" } else { "negative" }
            )));
        }
        let mut rng = keyed_rng(seed, &[sign.value() as u64]);
        class.shuffle(&mut rng);
        let k = (train_fraction * class.len() as f64).round() as usize;
        test.extend_from_slice(&class[k..]);
        class.truncate(k);
        train.extend(class);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(EdgeSplit { train, test, seed })
}
