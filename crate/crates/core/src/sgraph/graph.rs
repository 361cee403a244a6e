use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GraphError, RawRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    pub fn from_weight(w: f64) -> Option<Self> {
        if w > 0.0 {
            Some(Sign::Positive)
        } else if w < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn is_positive(self) -> bool {
        self == Sign::Positive
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" | "+1" => Ok(Sign::Positive),
            "-1" => Ok(Sign::Negative),
            other => Err(format!("sign must be 1 or -1, got `{other}`")),
        }
    }
}

/// Edge between dense node ids. Stored graphs orient each unordered pair
/// with `src < dst`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignedEdge {
    pub src: usize,
    pub dst: usize,
    pub sign: Sign,
}

impl SignedEdge {
    pub fn new(src: usize, dst: usize, sign: Sign) -> Self {
        Self { src, dst, sign }
    }

    /// The same edge with `src < dst`.
    pub fn canonical(self) -> Self {
        if self.src <= self.dst {
            self
        } else {
            Self::new(self.dst, self.src, self.sign)
        }
    }
}

/// Resolution of repeated records for one node pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictPolicy {
    #[default]
    NegativeWins,
    FirstWins,
}

impl FromStr for ConflictPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative-wins" => Ok(Self::NegativeWins),
            "first-wins" => Ok(Self::FirstWins),
            other => Err(format!("unknown conflict policy `{other}`")),
        }
    }
}

/// Dense id ↔ raw id mapping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdMap {
    raw: Vec<String>,
    dense: HashMap<String, usize>,
}

impl IdMap {
    /// Sorts raw ids (numerically when every id is an integer) and assigns
    /// dense ids in that order.
    pub fn from_raw_ids(ids: impl IntoIterator<Item = String>) -> Self {
        let mut raw: Vec<String> = ids.into_iter().collect();
        let numeric = raw.iter().all(|s| s.parse::<i128>().is_ok());
        if numeric {
            raw.sort_by_key(|s| s.parse::<i128>().unwrap());
        } else {
            raw.sort();
        }
        raw.dedup();
        Self::from_ordered(raw)
    }

    /// Keeps the given order: `raw[k]` gets dense id `k`.
    pub fn from_ordered(raw: Vec<String>) -> Self {
        let dense = raw.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { raw, dense }
    }

    /// Identity map `"0"..n`.
    pub fn identity(n: usize) -> Self {
        Self::from_ordered((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self, dense: usize) -> &str {
        &self.raw[dense]
    }

    pub fn dense(&self, raw: &str) -> Option<usize> {
        self.dense.get(raw).copied()
    }

    pub fn raw_ids(&self) -> &[String] {
        &self.raw
    }
}

/// Symmetric signed adjacency over dense ids `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedGraph {
    adjacency: Vec<Vec<(usize, Sign)>>,
    ids: IdMap,
}

impl SignedGraph {
    /// Builds from edges over dense ids. Later duplicates of a pair are
    /// resolved with `policy` just like raw records.
    pub fn from_edges(ids: IdMap, edges: &[SignedEdge], policy: ConflictPolicy) -> Self {
        let n = ids.len();
        let mut pairs: HashMap<(usize, usize), Sign> = HashMap::new();
        let mut order = Vec::new();
        for e in edges {
            assert!(e.src < n && e.dst < n, "edge endpoint out of range");
            if e.src == e.dst {
                continue;
            }
            let key = (e.src.min(e.dst), e.src.max(e.dst));
            match pairs.entry(key) {
                Entry::Vacant(slot) => {
                    slot.insert(e.sign);
                    order.push(key);
                }
                Entry::Occupied(mut slot) => {
                    if policy == ConflictPolicy::NegativeWins && e.sign == Sign::Negative {
                        slot.insert(Sign::Negative);
                    }
                }
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for key in order {
            let sign = pairs[&key];
            adjacency[key.0].push((key.1, sign));
            adjacency[key.1].push((key.0, sign));
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Self { adjacency, ids }
    }

    /// Dense ids `0..n` named by their decimal index.
    pub fn from_dense_edges(n: usize, edges: &[SignedEdge]) -> Self {
        Self::from_edges(IdMap::identity(n), edges, ConflictPolicy::NegativeWins)
    }

    /// A graph on the same node set holding only `edges`.
    pub fn with_edges(&self, edges: &[SignedEdge]) -> Self {
        Self::from_edges(self.ids.clone(), edges, ConflictPolicy::NegativeWins)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    /// Neighbors of `i` with signs, ascending by id.
    pub fn neighbors(&self, i: usize) -> &[(usize, Sign)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn sign(&self, i: usize, j: usize) -> Option<Sign> {
        let row = &self.adjacency[i];
        row.binary_search_by(|&(k, _)| k.cmp(&j)).ok().map(|p| row[p].1)
    }

    /// One entry per unordered pair, `src < dst`, ascending.
    pub fn edges(&self) -> Vec<SignedEdge> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, s) in row {
                if i < j {
                    out.push(SignedEdge::new(i, j, s));
                }
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn n_positive(&self) -> usize {
        self.count_sign(Sign::Positive)
    }

    pub fn n_negative(&self) -> usize {
        self.count_sign(Sign::Negative)
    }

    fn count_sign(&self, sign: Sign) -> usize {
        self.adjacency
            .iter()
            .flat_map(|row| row.iter())
            .filter(|(_, s)| *s == sign)
            .count()
            / 2
    }
}

/// Maps weights to signs, drops zero weights and self-loops, symmetrizes
/// and assigns dense ids. Only nodes touching a kept edge are retained.
pub fn build_graph(records: &[RawRecord], policy: ConflictPolicy) -> Result<SignedGraph, GraphError> {
    let kept: Vec<(&str, &str, Sign)> = records
        .iter()
        .filter(|r| r.src != r.dst)
        .filter_map(|r| Sign::from_weight(r.weight).map(|s| (r.src.as_str(), r.dst.as_str(), s)))
        .collect();
    if kept.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let ids = IdMap::from_raw_ids(
        kept.iter()
            .flat_map(|(a, b, _)| [a.to_string(), b.to_string()]),
    );
    let edges: Vec<SignedEdge> = kept
        .iter()
        .map(|(a, b, s)| SignedEdge::new(ids.dense(a).unwrap(), ids.dense(b).unwrap(), *s))
        .collect();
    Ok(SignedGraph::from_edges(ids, &edges, policy))
}
