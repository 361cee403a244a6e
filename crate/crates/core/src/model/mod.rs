//! The multi-faceted attention encoder.
//!
//! Every node embedding is `M` facets of `D` values, flattened facet-major.
//! At each order `l` the balanced and unbalanced neighbors of a node are
//! aggregated separately with facet attention, each added to the previous
//! order's composite, and the two results fused by `tanh(W_BUᵀ[h_B ‖ h_U])`.
//! All orders read the initial embeddings as keys and values.

mod attention;
mod config;
mod export;
mod forward;
mod init;

pub use attention::{aggregate_order, attention_weights, compose, AttentionParams};
pub use config::{
    attention_vector_name, composite_name, transform_name, AttentionKernel, ModelConfig, EMBEDDING,
};
pub use export::{read_embeddings, write_embeddings, EmbeddingFile};
pub use forward::Muse;
pub use init::{glorot, init_embeddings, init_embeddings_for, init_model_params};

use thiserror::Error;

use crate::difftape::TapeError;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("neighbor sets cover {have} orders, model needs {need}")]
    Order { have: usize, need: usize },
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error("embedding file: {0}")]
    Format(String),
    #[error("embedding file: {0}")]
    Io(String),
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e.to_string())
    }
}
