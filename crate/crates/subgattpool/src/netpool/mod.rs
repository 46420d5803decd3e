//! Network configuration, parameters and the hierarchical forward pass.

mod forward;
mod params;

pub use forward::{
    forward_graph, verify_stochastic_contracts, Diagnostics, ForwardOptions, ForwardPass,
    PathSelection,
};
pub use params::{
    load_checkpoint, save_checkpoint, Checkpoint, GinLayerParams, ModelParams, SubGattHeadParams,
    SubGattLayerParams, CHECKPOINT_VERSION,
};

use crate::error::{EngineError, Result};
use crate::numcore::Precision;
use serde::{Deserialize, Serialize};

/// Everything that fixes the architecture. Parameter shapes depend only on
/// this struct, never on individual graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Node feature width of the dataset.
    pub feature_dim: usize,
    pub num_classes: usize,
    /// Largest node count over the dataset; determines pooled level sizes.
    pub max_nodes: usize,
    /// Number of hierarchy levels including the input graph.
    pub levels: usize,
    /// Pooling ratio between consecutive levels.
    pub gamma: f64,
    /// Maximum nodes per rooted path.
    pub path_len: usize,
    /// Paths sampled per node per epoch.
    pub paths_per_node: usize,
    /// Embedding width.
    pub hidden_dim: usize,
    /// Attention heads in embedding layers; must divide `hidden_dim`.
    pub heads: usize,
    /// Stacked subgraph-attention embedding layers on the input graph.
    pub subgatt_layers: usize,
    /// Dropout rate on the graph representation during training.
    pub dropout: f64,
    pub leaky_slope: f64,
    pub precision: Precision,
}

impl NetworkConfig {
    /// Defaults for everything that is not dataset-specific.
    pub fn new(feature_dim: usize, num_classes: usize, max_nodes: usize) -> Self {
        NetworkConfig {
            feature_dim,
            num_classes,
            max_nodes,
            levels: 3,
            gamma: 0.5,
            path_len: 3,
            paths_per_node: 12,
            hidden_dim: 128,
            heads: 1,
            subgatt_layers: 1,
            dropout: 0.1,
            leaky_slope: 0.01,
            precision: Precision::Double,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(EngineError::Config { detail });
        if self.feature_dim == 0 {
            return fail("feature_dim must be positive".into());
        }
        if self.num_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.max_nodes == 0 {
            return fail("max_nodes must be positive".into());
        }
        if self.levels < 2 {
            return fail(format!("need at least 2 levels, got {}", self.levels));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.path_len == 0 {
            return fail("path_len must be positive".into());
        }
        if self.paths_per_node == 0 {
            return fail("paths_per_node must be positive".into());
        }
        if self.hidden_dim == 0 || self.heads == 0 || self.hidden_dim % self.heads != 0 {
            return fail(format!(
                "heads ({}) must divide hidden_dim ({})",
                self.heads, self.hidden_dim
            ));
        }
        if self.subgatt_layers == 0 {
            return fail("subgatt_layers must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.leaky_slope <= 0.0 {
            return fail(format!(
                "leaky_slope must be positive, got {}",
                self.leaky_slope
            ));
        }
        self.level_sizes()?;
        Ok(())
    }

    /// Node counts of the pooled levels `2..=levels`. The first pooled size
    /// is at least two and each later level shrinks by `gamma` (rounded,
    /// floor one); ties with the previous level are broken by decrementing,
    /// and hitting zero is a configuration error.
    pub fn level_sizes(&self) -> Result<Vec<usize>> {
        let mut sizes = Vec::with_capacity(self.levels - 1);
        let first = (self.gamma * self.max_nodes as f64).round() as usize;
        sizes.push(first.max(2));
        for _ in 2..self.levels {
            let prev = *sizes.last().unwrap();
            let mut next = ((self.gamma * prev as f64).round() as usize).max(1);
            if next >= prev {
                next = prev.saturating_sub(1);
            }
            if next == 0 {
                return Err(EngineError::Config {
                    detail: format!(
                        "level sizes collapse to zero with gamma {} from {} nodes; \
                         reduce levels or raise gamma",
                        self.gamma, self.max_nodes
                    ),
                });
            }
            sizes.push(next);
        }
        Ok(sizes)
    }

    /// Per-head width of embedding layers.
    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    /// Trainable parameter count by block, plus the grand total. Matches
    /// `ModelParams::init` exactly; a dataset influences it only through
    /// `feature_dim`, `num_classes` and `max_nodes`.
    pub fn parameter_breakdown(&self) -> Result<Vec<(String, usize)>> {
        let sizes = self.level_sizes()?;
        let (d, k, t) = (self.feature_dim, self.hidden_dim, self.path_len);
        let kh = self.head_dim();
        let mut out = Vec::new();
        let mut embed = 0;
        for layer in 0..self.subgatt_layers {
            let in_dim = if layer == 0 { d } else { k };
            embed += self.heads * (kh * (t * in_dim) + kh);
        }
        out.push(("subgatt_embed".to_string(), embed));
        out.push(("subgatt_pool".to_string(), sizes[0] * (t * d) + sizes[0]));
        let mut gin_embed = 0;
        let mut gin_pool = 0;
        for r in 0..self.levels.saturating_sub(2) {
            gin_embed += 1 + k * k + k + k * k + k;
            let next = sizes[r + 1];
            gin_pool += 1 + k * k + k + k * next + next;
        }
        out.push(("gin_embed".to_string(), gin_embed));
        out.push(("gin_pool".to_string(), gin_pool));
        out.push(("intra_attention".to_string(), k));
        out.push(("inter_attention".to_string(), k));
        out.push((
            "classifier".to_string(),
            self.num_classes * k + self.num_classes,
        ));
        Ok(out)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self.parameter_breakdown()?.iter().map(|(_, n)| n).sum())
    }
}
