//! Graph containers, dataset loading, synthesis and fold splitting.

mod folds;
mod synthetic;
mod tu;

pub use folds::{stratified_folds, stratified_holdout};
pub use synthetic::{
    clique_graph_dataset, find_4_cliques, generate_clique_dataset, SyntheticMeta, SYNTHETIC_NAME,
};
pub use tu::{load_tu_dataset, write_tu_dataset, RawGraph};

use crate::error::{EngineError, Result};
use crate::numcore::DenseMatrix;

/// One labelled graph: symmetric non-negative adjacency plus node features.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub adjacency: DenseMatrix,
    pub features: DenseMatrix,
    /// Class index in `0..num_classes`.
    pub label: usize,
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn degree(&self, node: usize) -> f64 {
        self.adjacency.row(node).iter().sum()
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.adjacency
            .row(node)
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// `D^{-1/2} (A + I) D^{-1/2}` on the stored adjacency.
    pub fn normalized_adjacency(&self) -> DenseMatrix {
        normalized_adjacency(&self.adjacency)
    }

    /// Relabel nodes: old node `i` becomes `perm[i]`. `perm` must be a
    /// permutation of `0..n`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let valid = perm.len() == n
            && perm
                .iter()
                .all(|&p| p < n && !std::mem::replace(&mut seen[p], true));
        if !valid {
            return Err(EngineError::contract(
                "permute",
                format!("not a permutation of 0..{n}: {perm:?}"),
            ));
        }
        let mut adjacency = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                adjacency.set(perm[i], perm[j], self.adjacency.get(i, j));
            }
        }
        let mut features = DenseMatrix::zeros(n, self.features.cols());
        for i in 0..n {
            for j in 0..self.features.cols() {
                features.set(perm[i], j, self.features.get(i, j));
            }
        }
        Ok(Graph {
            adjacency,
            features,
            label: self.label,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.adjacency.shape();
        if r != c {
            return Err(EngineError::contract(
                "graph",
                format!("adjacency must be square, got {r}x{c}"),
            ));
        }
        if !self.adjacency.is_finite() || !self.features.is_finite() {
            return Err(EngineError::NonFinite { op: "graph" });
        }
        if !self.adjacency.is_symmetric(1e-12) {
            return Err(EngineError::contract("graph", "adjacency is not symmetric"));
        }
        if self.adjacency.data().iter().any(|&v| v < 0.0) {
            return Err(EngineError::contract(
                "graph",
                "adjacency has negative entries",
            ));
        }
        if self.features.rows() != r {
            return Err(EngineError::contract(
                "graph",
                format!(
                    "feature rows {} do not match node count {r}",
                    self.features.rows()
                ),
            ));
        }
        Ok(())
    }
}

/// Symmetric degree normalization with self loops on a plain matrix.
pub fn normalized_adjacency(a: &DenseMatrix) -> DenseMatrix {
    crate::numcore::degree_normalize_value(a)
}

/// A loaded dataset with a shared feature space and 0-based labels.
#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl GraphDataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::num_nodes).max().unwrap_or(0)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for g in &self.graphs {
            counts[g.label] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.graphs.iter().enumerate() {
            g.validate().map_err(|e| {
                EngineError::Ingestion {
                    detail: format!("graph {i}: {e}"),
                }
            })?;
            if g.features.cols() != self.feature_dim {
                return Err(EngineError::Ingestion {
                    detail: format!(
                        "graph {i} has feature dim {}, dataset says {}",
                        g.features.cols(),
                        self.feature_dim
                    ),
                });
            }
            if g.label >= self.num_classes {
                return Err(EngineError::Ingestion {
                    detail: format!(
                        "graph {i} has label {}, dataset says {} classes",
                        g.label, self.num_classes
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Map raw integer class labels to contiguous 0-based indices, ordered by
/// ascending raw value. Returns the per-graph indices and the class count.
pub(crate) fn remap_labels(raw: &[i64]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<i64> = raw.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mapped = raw
        .iter()
        .map(|v| distinct.binary_search(v).unwrap())
        .collect();
    (mapped, distinct.len())
}

/// Degree one-hot features: bucket `min(degree, dim - 1)` where
/// `dim = min(max_degree + 1, cap)`.
pub(crate) fn degree_features(adjacencies: &[DenseMatrix], cap: usize) -> (Vec<DenseMatrix>, usize) {
    let max_degree = adjacencies
        .iter()
        .flat_map(|a| (0..a.rows()).map(|i| a.row(i).iter().filter(|&&v| v != 0.0).count()))
        .max()
        .unwrap_or(0);
    let dim = (max_degree + 1).min(cap.max(1));
    let feats = adjacencies
        .iter()
        .map(|a| {
            let n = a.rows();
            let mut x = DenseMatrix::zeros(n, dim);
            for i in 0..n {
                let d = a.row(i).iter().filter(|&&v| v != 0.0).count();
                x.set(i, d.min(dim - 1), 1.0);
            }
            x
        })
        .collect();
    (feats, dim)
}

/// One-hot features over the distinct node labels of the whole dataset,
/// ordered by ascending raw value.
pub(crate) fn node_label_features(node_labels: &[Vec<i64>]) -> (Vec<DenseMatrix>, usize) {
    let mut distinct: Vec<i64> = node_labels.iter().flatten().cloned().collect();
    distinct.sort_unstable();
    distinct.dedup();
    let dim = distinct.len().max(1);
    let feats = node_labels
        .iter()
        .map(|labels| {
            let mut x = DenseMatrix::zeros(labels.len().max(1), dim);
            for (i, l) in labels.iter().enumerate() {
                x.set(i, distinct.binary_search(l).unwrap(), 1.0);
            }
            x
        })
        .collect();
    (feats, dim)
}
