use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::sgraph::NeighborClass;

/// How the attention aggregation is evaluated on the tape.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKernel {
    /// One fused op; memory linear in the number of pairs.
    #[default]
    Fused,
    /// Gather / softmax / scatter primitives; pairs × M·D intermediates.
    Composed,
}

impl std::str::FromStr for AttentionKernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fused" => Ok(Self::Fused),
            "composed" => Ok(Self::Composed),
            other => Err(format!("unknown attention kernel `{other}` (expected fused or composed)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Facet count `M`.
    pub facets: usize,
    /// Per-facet dimension `D`.
    pub facet_dim: usize,
    /// Neighbor orders `L`.
    pub orders: usize,
    pub leaky_slope: f64,
    /// Neighbor-set cap; `None` uses the size-based default.
    pub neighbor_cap: Option<usize>,
    /// One attention pair per sign class shared by every order.
    pub share_attention: bool,
    pub kernel: AttentionKernel,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            facets: 3,
            facet_dim: 32,
            orders: 2,
            leaky_slope: 0.2,
            neighbor_cap: None,
            share_attention: false,
            kernel: AttentionKernel::Fused,
        }
    }
}

impl ModelConfig {
    pub fn width(&self) -> usize {
        self.facets * self.facet_dim
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.facets == 0 {
            return bad("facet count must be at least 1".into());
        }
        if self.facet_dim == 0 {
            return bad("facet dimension must be at least 1".into());
        }
        if self.orders == 0 {
            return bad("order count must be at least 1".into());
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope {} not in (0, 1)", self.leaky_slope));
        }
        if self.neighbor_cap == Some(0) {
            return bad("neighbor cap must be at least 1".into());
        }
        Ok(())
    }
}

pub const EMBEDDING: &str = "embedding";

fn attention_scope(cfg: &ModelConfig, order: usize, class: NeighborClass) -> String {
    if cfg.share_attention {
        format!("attention.shared.{}", class.tag())
    } else {
        format!("attention.{order}.{}", class.tag())
    }
}

/// `D x D` linear transform of facets for (order, class).
pub fn transform_name(cfg: &ModelConfig, order: usize, class: NeighborClass) -> String {
    format!("{}.transform", attention_scope(cfg, order, class))
}

/// `2D x 1` attention vector for (order, class).
pub fn attention_vector_name(cfg: &ModelConfig, order: usize, class: NeighborClass) -> String {
    format!("{}.vector", attention_scope(cfg, order, class))
}

/// `2MD x MD` composite transform for an order.
pub fn composite_name(order: usize) -> String {
    format!("composite.{order}")
}
