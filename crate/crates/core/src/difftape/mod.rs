//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of a forward pass; [`Tape::backward`]
//! walks it in reverse creation order and accumulates adjoints. Parameters
//! are read from a [`ParamStore`] by name and their gradients written back
//! into it, summing over every place a parameter was used.

mod facet_attention;
mod params;
mod tape;
mod tensor;

pub use facet_attention::{pair_weights, PairIndex};
pub use params::{Param, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub(crate) use tape::sigmoid;
pub use tensor::{Shape, Tensor};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TapeError {
    #[error("{op}: incompatible shapes {left} and {right}")]
    Dimension {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("tensor of shape {shape} cannot hold {len} values")]
    Length { shape: Shape, len: usize },
    #[error("non-finite value at index {index} during {context}")]
    NonFinite { context: &'static str, index: usize },
    #[error("backward root must be 1x1, got {0}")]
    NonScalarRoot(Shape),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("{op}: index {index} out of range for {len} rows")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("probability {value} at row {row} outside [0, 1]")]
    Probability { row: usize, value: f64 },
}
