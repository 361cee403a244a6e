use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GraphError, Sign, SignedGraph};
use crate::difftape::PairIndex;
use crate::seed::mix_seed;

/// Graphs above this size get a neighbor cap by default.
const UNCAPPED_MAX_NODES: usize = 10_000;
const DEFAULT_CAP: usize = 50;

/// No cap up to 10,000 nodes, 50 above.
pub fn default_neighbor_cap(n: usize) -> Option<usize> {
    (n > UNCAPPED_MAX_NODES).then_some(DEFAULT_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeighborClass {
    Balanced,
    Unbalanced,
}

impl NeighborClass {
    pub const BOTH: [NeighborClass; 2] = [NeighborClass::Balanced, NeighborClass::Unbalanced];

    pub fn tag(self) -> &'static str {
        match self {
            NeighborClass::Balanced => "balanced",
            NeighborClass::Unbalanced => "unbalanced",
        }
    }

    fn sign(self) -> Sign {
        match self {
            NeighborClass::Balanced => Sign::Positive,
            NeighborClass::Unbalanced => Sign::Negative,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    ids: Vec<usize>,
}

impl Csr {
    fn row(&self, i: usize) -> &[usize] {
        &self.ids[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Per-node, per-order balanced and unbalanced neighbor lists.
///
/// `B(i,l)` holds every `j ≠ i` reachable from `i` by an `l`-edge walk whose
/// sign product is `+1`; `U(i,l)` likewise for `−1`. A node may be in both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSets {
    n: usize,
    balanced: Vec<Csr>,
    unbalanced: Vec<Csr>,
}

impl NeighborSets {
    pub fn order(&self) -> usize {
        self.balanced.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `B(i, l)`, sorted; `l` is 1-based.
    pub fn balanced(&self, i: usize, l: usize) -> &[usize] {
        self.balanced[l - 1].row(i)
    }

    /// `U(i, l)`, sorted; `l` is 1-based.
    pub fn unbalanced(&self, i: usize, l: usize) -> &[usize] {
        self.unbalanced[l - 1].row(i)
    }

    pub fn get(&self, i: usize, l: usize, class: NeighborClass) -> &[usize] {
        match class {
            NeighborClass::Balanced => self.balanced(i, l),
            NeighborClass::Unbalanced => self.unbalanced(i, l),
        }
    }

    /// Number of (node, neighbor) pairs at order `l` of `class`.
    pub fn n_pairs(&self, l: usize, class: NeighborClass) -> usize {
        self.csr(l, class).ids.len()
    }

    /// Aggregation pairs for one (order, class), targets and keys both `0..n`.
    pub fn pair_index(&self, l: usize, class: NeighborClass) -> PairIndex {
        let csr = self.csr(l, class);
        PairIndex::from_csr(self.n, csr.offsets.clone(), csr.ids.clone())
    }

    fn csr(&self, l: usize, class: NeighborClass) -> &Csr {
        match class {
            NeighborClass::Balanced => &self.balanced[l - 1],
            NeighborClass::Unbalanced => &self.unbalanced[l - 1],
        }
    }
}

/// Per-thread visit marks, reset by bumping a generation counter.
struct Marks {
    pos: Vec<u64>,
    neg: Vec<u64>,
    generation: u64,
}

impl Marks {
    fn new(n: usize) -> Self {
        Self {
            pos: vec![0; n],
            neg: vec![0; n],
            generation: 0,
        }
    }

    fn next(&mut self) {
        self.generation += 1;
    }

    /// True when `(node, sign)` had not been seen in this generation.
    fn visit(&mut self, node: usize, sign: Sign) -> bool {
        let slot = match sign {
            Sign::Positive => &mut self.pos[node],
            Sign::Negative => &mut self.neg[node],
        };
        if *slot == self.generation {
            false
        } else {
            *slot = self.generation;
            true
        }
    }
}

/// Per-source result: for each order, (balanced, unbalanced).
type NodeLists = Vec<(Vec<usize>, Vec<usize>)>;

/// Expands order-(l−1) walk endpoints through order-1 neighbors, tracking
/// the sign product. Walk endpoints may revisit the source; the source is
/// only dropped from the reported sets.
///
/// With `cap`, any set longer than `cap` is replaced by a uniform sample of
/// `cap` members, seeded per (node, order, class, seed).
pub fn higher_order_neighbor_sets(
    g: &SignedGraph,
    order: usize,
    cap: Option<usize>,
    seed: u64,
) -> Result<NeighborSets, GraphError> {
    if order == 0 {
        return Err(GraphError::InvalidOrder);
    }
    if cap == Some(0) {
        return Err(GraphError::InvalidCap);
    }
    let n = g.n();
    let per_node: Vec<NodeLists> = (0..n)
        .into_par_iter()
        .map_init(
            || Marks::new(n),
            |marks, i| node_lists(g, i, order, cap, seed, marks),
        )
        .collect();

    let mut balanced = Vec::with_capacity(order);
    let mut unbalanced = Vec::with_capacity(order);
    for l in 0..order {
        for (class_idx, out) in [&mut balanced, &mut unbalanced].into_iter().enumerate() {
            let mut offsets = Vec::with_capacity(n + 1);
            offsets.push(0);
            let mut ids = Vec::new();
            for lists in &per_node {
                let list = if class_idx == 0 { &lists[l].0 } else { &lists[l].1 };
                ids.extend_from_slice(list);
                offsets.push(ids.len());
            }
            out.push(Csr { offsets, ids });
        }
    }
    Ok(NeighborSets { n, balanced, unbalanced })
}

fn node_lists(
    g: &SignedGraph,
    source: usize,
    order: usize,
    cap: Option<usize>,
    seed: u64,
    marks: &mut Marks,
) -> NodeLists {
    let mut out = Vec::with_capacity(order);
    let mut frontier: Vec<(usize, Sign)> = g.neighbors(source).to_vec();
    for l in 1..=order {
        if l > 1 {
            marks.next();
            let mut next = Vec::new();
            for &(k, s) in &frontier {
                for &(j, t) in g.neighbors(k) {
                    let product = s * t;
                    if marks.visit(j, product) {
                        next.push((j, product));
                    }
                }
            }
            frontier = next;
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &(j, s) in &frontier {
            if j == source {
                continue;
            }
            match s {
                Sign::Positive => pos.push(j),
                Sign::Negative => neg.push(j),
            }
        }
        pos.sort_unstable();
        neg.sort_unstable();
        if let Some(cap) = cap {
            pos = cap_list(pos, cap, seed, source, l, NeighborClass::Balanced);
            neg = cap_list(neg, cap, seed, source, l, NeighborClass::Unbalanced);
        }
        out.push((pos, neg));
    }
    out
}

fn cap_list(list: Vec<usize>, cap: usize, seed: u64, node: usize, order: usize, class: NeighborClass) -> Vec<usize> {
    if list.len() <= cap {
        return list;
    }
    let key = mix_seed(seed, &[node as u64, order as u64, class.sign().value() as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let mut picked: Vec<usize> = sample(&mut rng, list.len(), cap).into_iter().map(|p| list[p]).collect();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgraph::SignedEdge;
    use Sign::*;

    fn path(signs: &[Sign]) -> SignedGraph {
        let edges: Vec<_> = signs
            .iter()
            .enumerate()
            .map(|(i, &s)| SignedEdge::new(i, i + 1, s))
            .collect();
        SignedGraph::from_dense_edges(signs.len() + 1, &edges)
    }

    #[test]
    fn friend_of_friend_is_balanced() {
        let sets = higher_order_neighbor_sets(&path(&[Positive, Positive]), 2, None, 0).unwrap();
        assert!(sets.balanced(0, 2).contains(&2));
        assert!(sets.unbalanced(0, 2).is_empty());
    }

    #[test]
    fn enemy_of_friend_is_unbalanced() {
        let sets = higher_order_neighbor_sets(&path(&[Positive, Negative]), 2, None, 0).unwrap();
        assert!(sets.unbalanced(0, 2).contains(&2));
        assert!(!sets.balanced(0, 2).contains(&2));
    }

    #[test]
    fn order_one_partitions_adjacency() {
        let g = SignedGraph::from_dense_edges(
            4,
            &[
                SignedEdge::new(0, 1, Positive),
                SignedEdge::new(0, 2, Negative),
                SignedEdge::new(0, 3, Positive),
            ],
        );
        let sets = higher_order_neighbor_sets(&g, 1, None, 0).unwrap();
        assert_eq!(sets.balanced(0, 1), &[1, 3]);
        assert_eq!(sets.unbalanced(0, 1), &[2]);
        assert_eq!(sets.balanced(2, 1), &[] as &[usize]);
        assert_eq!(sets.unbalanced(2, 1), &[0]);
    }

    #[test]
    fn source_never_in_own_sets_but_walks_pass_through_it() {
        // 1 -(+)- 0 -(-)- 2: at order 2 node 0 returns to itself, at order 3
        // walks 0→1→0→2 reach 2 with product −1.
        let g = SignedGraph::from_dense_edges(
            3,
            &[SignedEdge::new(0, 1, Positive), SignedEdge::new(0, 2, Negative)],
        );
        let sets = higher_order_neighbor_sets(&g, 3, None, 0).unwrap();
        assert!(!sets.balanced(0, 2).contains(&0));
        assert_eq!(sets.unbalanced(0, 3), &[2]);
        assert_eq!(sets.balanced(0, 3), &[1]);
    }

    #[test]
    fn dual_membership() {
        // Square 0-1-3 (+,+) and 0-2-3 (+,-): node 3 is both at order 2.
        let g = SignedGraph::from_dense_edges(
            4,
            &[
                SignedEdge::new(0, 1, Positive),
                SignedEdge::new(1, 3, Positive),
                SignedEdge::new(0, 2, Positive),
                SignedEdge::new(2, 3, Negative),
            ],
        );
        let sets = higher_order_neighbor_sets(&g, 2, None, 0).unwrap();
        assert!(sets.balanced(0, 2).contains(&3));
        assert!(sets.unbalanced(0, 2).contains(&3));
    }

    #[test]
    fn cap_is_deterministic_subset() {
        let edges: Vec<_> = (1..40).map(|j| SignedEdge::new(0, j, Positive)).collect();
        let g = SignedGraph::from_dense_edges(40, &edges);
        let a = higher_order_neighbor_sets(&g, 2, Some(5), 7).unwrap();
        let b = higher_order_neighbor_sets(&g, 2, Some(5), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.balanced(0, 1).len(), 5);
        assert!(a.balanced(0, 1).windows(2).all(|w| w[0] < w[1]));
        let c = higher_order_neighbor_sets(&g, 2, Some(5), 8).unwrap();
        assert_ne!(a.balanced(0, 1), c.balanced(0, 1));
        // Leaf 1 reaches the 38 other leaves at order 2.
        assert_eq!(a.balanced(1, 2).len(), 5);
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = path(&[Positive]);
        assert!(matches!(higher_order_neighbor_sets(&g, 0, None, 0), Err(GraphError::InvalidOrder)));
        assert!(matches!(higher_order_neighbor_sets(&g, 1, Some(0), 0), Err(GraphError::InvalidCap)));
    }

    #[test]
    fn default_cap_threshold() {
        assert_eq!(default_neighbor_cap(10_000), None);
        assert_eq!(default_neighbor_cap(10_001), Some(50));
    }
}
