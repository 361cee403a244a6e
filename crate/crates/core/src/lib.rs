//! Multi-faceted attention embeddings for signed networks.
//!
//! Modules, bottom-up: [`sgraph`] loads signed edge lists and derives
//! higher-order balanced/unbalanced neighbor sets; [`difftape`] is a small
//! reverse-mode autodiff tape; [`model`] is the encoder; [`objective`] the
//! loss; [`trainer`] runs Adam and checkpoints; [`metrics`] scores link-sign
//! prediction.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod difftape;
pub mod metrics;
pub mod model;
pub mod objective;
mod scalar;
pub mod seed;
pub mod sgraph;
pub mod trainer;

pub use scalar::Scalar;

use thiserror::Error;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] sgraph::GraphError),
    #[error(transparent)]
    Tape(#[from] difftape::TapeError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Objective(#[from] objective::ObjectiveError),
    #[error(transparent)]
    Train(#[from] trainer::TrainError),
    #[error(transparent)]
    Checkpoint(#[from] trainer::CheckpointError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
}

/// Scores `edges` with the trained predictor and reports F1 / AUC.
pub fn evaluate_edges<T: Scalar>(
    params: &difftape::ParamStore<T>,
    embeddings: &difftape::Tensor<T>,
    edges: &[sgraph::SignedEdge],
) -> Result<metrics::EvalReport, Error> {
    let predictor = objective::PredictorParams::from_store(params)?;
    let scores = objective::score_edges(embeddings, &predictor, edges)?;
    let labels: Vec<bool> = edges.iter().map(|e| e.sign.is_positive()).collect();
    Ok(metrics::evaluate(&scores, &labels)?)
}

pub type Tensor64 = difftape::Tensor<f64>;
pub type Tape64 = difftape::Tape<f64>;
pub type ParamStore64 = difftape::ParamStore<f64>;
pub type Muse64 = model::Muse<f64>;
pub type Trainer64 = trainer::Trainer<f64>;

pub type Tensor32 = difftape::Tensor<f32>;
pub type Tape32 = difftape::Tape<f32>;
pub type ParamStore32 = difftape::ParamStore<f32>;
pub type Muse32 = model::Muse<f32>;
pub type Trainer32 = trainer::Trainer<f32>;
