//! Signed graphs: edge-list ingestion, symmetrization, stratified splits
//! and higher-order balanced/unbalanced neighbor sets.

mod graph;
mod io;
mod neighbors;
mod parse;
mod split;

pub use graph::{build_graph, ConflictPolicy, IdMap, Sign, SignedEdge, SignedGraph};
pub use io::{read_split_manifest, write_canonical_edges, write_id_map, write_split_manifest, SplitManifest};
pub use neighbors::{higher_order_neighbor_sets, default_neighbor_cap, NeighborClass, NeighborSets};
pub use parse::{parse_edge_list, Delimiter, EdgeFormat, RawRecord};
pub use split::{split_edges, EdgeSplit};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: column {column} missing (line has {found} fields)")]
    MissingColumn {
        line: usize,
        column: usize,
        found: usize,
    },
    #[error("no usable edges: every record was a self-loop or had zero weight")]
    EmptyGraph,
    #[error("cannot split: {0}")]
    Split(String),
    #[error("neighbor order must be at least 1")]
    InvalidOrder,
    #[error("neighbor cap must be at least 1")]
    InvalidCap,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("edge {0} -- {1} is not in the graph")]
    UnknownEdge(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
