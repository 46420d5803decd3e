//! Enumeration and per-epoch sampling of rooted simple paths.
//!
//! A rooted path starts at its root and never revisits a node. Enumeration
//! walks neighbors in ascending id order and emits every prefix of the walk,
//! so a path with a single node (the root itself) is always a candidate and
//! candidates are bounded by `max_nodes` nodes.

use crate::error::{EngineError, Result};
use crate::numcore::DenseMatrix;
use crate::rng::{stream, tag};
use rand::seq::SliceRandom;

/// A simple path; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RootedPath {
    pub nodes: Vec<usize>,
}

impl RootedPath {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// All rooted simple paths with `1..=max_nodes` nodes, in depth-first order
/// with neighbors visited in ascending id order.
pub fn enumerate_rooted_paths(
    adj: &DenseMatrix,
    root: usize,
    max_nodes: usize,
) -> Vec<RootedPath> {
    let mut out = Vec::new();
    if max_nodes == 0 || root >= adj.rows() {
        return out;
    }
    let mut current = vec![root];
    let mut on_path = vec![false; adj.rows()];
    on_path[root] = true;
    extend(adj, max_nodes, &mut current, &mut on_path, &mut out);
    out
}

fn extend(
    adj: &DenseMatrix,
    max_nodes: usize,
    current: &mut Vec<usize>,
    on_path: &mut Vec<bool>,
    out: &mut Vec<RootedPath>,
) {
    out.push(RootedPath {
        nodes: current.clone(),
    });
    if current.len() == max_nodes {
        return;
    }
    let tail = *current.last().unwrap();
    for next in 0..adj.cols() {
        if adj.get(tail, next) != 0.0 && !on_path[next] {
            current.push(next);
            on_path[next] = true;
            extend(adj, max_nodes, current, on_path, out);
            on_path[next] = false;
            current.pop();
        }
    }
}

/// Count estimate versus exact enumeration for paths of exactly `t` nodes.
///
/// For `t == 4` the estimate is the closed product
/// `d_i * sum_j (d_j - 1) * sum_j sum_k |N(k) \ {i, j}|` over neighbors
/// `j` of the root and `k` of `j` (excluding the root). The product double
/// counts shared neighborhoods on dense graphs, so the two values can
/// legitimately disagree; callers treat a mismatch as a diagnostic, not an
/// error. For other `t` the estimate falls back to the exact count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCountReport {
    pub root: usize,
    pub estimate: usize,
    pub exact: usize,
    pub used_formula: bool,
}

impl PathCountReport {
    pub fn agrees(&self) -> bool {
        self.estimate == self.exact
    }
}

pub fn count_rooted_paths(adj: &DenseMatrix, root: usize, t: usize) -> PathCountReport {
    let exact = enumerate_rooted_paths(adj, root, t)
        .into_iter()
        .filter(|p| p.len() == t)
        .count();
    if t != 4 {
        return PathCountReport {
            root,
            estimate: exact,
            exact,
            used_formula: false,
        };
    }
    let neighbors = |v: usize| -> Vec<usize> {
        (0..adj.cols()).filter(|&u| adj.get(v, u) != 0.0).collect()
    };
    let ni = neighbors(root);
    let degree = |v: usize| neighbors(v).len();
    let s1: usize = ni.iter().map(|&j| degree(j).saturating_sub(1)).sum();
    let mut s2 = 0usize;
    for &j in &ni {
        for &k in &neighbors(j) {
            if k == root {
                continue;
            }
            s2 += neighbors(k).iter().filter(|&&m| m != root && m != j).count();
        }
    }
    PathCountReport {
        root,
        estimate: ni.len() * s1 * s2,
        exact,
        used_formula: true,
    }
}

/// Paths chosen for every node of one graph for one epoch.
#[derive(Debug, Clone)]
pub struct EpochSample {
    pub per_node: Vec<Vec<RootedPath>>,
}

impl EpochSample {
    pub fn num_nodes(&self) -> usize {
        self.per_node.len()
    }

    pub fn max_path_len(&self) -> usize {
        self.per_node
            .iter()
            .flatten()
            .map(RootedPath::len)
            .max()
            .unwrap_or(0)
    }
}

/// Draw `l` paths per node. Nodes with at least `l` candidates contribute
/// `l` distinct paths chosen uniformly; nodes with fewer cycle round-robin
/// through one shuffled pass, so with `c` candidates and `l = q * c` every
/// candidate appears exactly `q` times. Each node draws from its own stream
/// derived from `seed`, so samples do not depend on visiting order.
pub fn sample_epoch(adj: &DenseMatrix, t: usize, l: usize, seed: u64) -> Result<EpochSample> {
    if l == 0 {
        return Err(EngineError::contract("sample_epoch", "l must be positive"));
    }
    let mut per_node = Vec::with_capacity(adj.rows());
    for node in 0..adj.rows() {
        let mut candidates = enumerate_rooted_paths(adj, node, t);
        let mut rng = stream(seed, &[tag::PATHS, node as u64]);
        candidates.shuffle(&mut rng);
        let chosen: Vec<RootedPath> = if candidates.len() >= l {
            candidates.into_iter().take(l).collect()
        } else {
            (0..l).map(|i| candidates[i % candidates.len()].clone()).collect()
        };
        per_node.push(chosen);
    }
    Ok(EpochSample { per_node })
}

/// Every candidate path for every node, for deterministic inference. The
/// per-node cap guards against dense graphs where enumeration explodes.
pub fn exhaustive_sample(adj: &DenseMatrix, t: usize, cap: usize) -> Result<EpochSample> {
    let mut per_node = Vec::with_capacity(adj.rows());
    for node in 0..adj.rows() {
        let candidates = enumerate_rooted_paths(adj, node, t);
        if candidates.len() > cap {
            return Err(EngineError::Resource {
                detail: format!(
                    "node {node} has {} rooted paths, cap is {cap}; \
                     use sampled inference for this graph",
                    candidates.len()
                ),
            });
        }
        per_node.push(candidates);
    }
    Ok(EpochSample { per_node })
}

/// Stack path features into a `paths.len() x (t * D)` matrix: node feature
/// rows concatenated along each path, zero padded to `t` nodes.
pub fn path_feature_matrix(
    paths: &[RootedPath],
    features: &DenseMatrix,
    t: usize,
) -> Result<DenseMatrix> {
    let d = features.cols();
    if paths.is_empty() {
        return Err(EngineError::contract("path_features", "no paths given"));
    }
    let mut out = DenseMatrix::zeros(paths.len(), t * d);
    for (r, path) in paths.iter().enumerate() {
        if path.len() > t {
            return Err(EngineError::contract(
                "path_features",
                format!("path has {} nodes, limit is {t}", path.len()),
            ));
        }
        for (slot, &node) in path.nodes.iter().enumerate() {
            for j in 0..d {
                out.set(r, slot * d + j, features.get(node, j));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> DenseMatrix {
        let mut adj = DenseMatrix::zeros(n, n);
        for &(u, v) in edges {
            adj.set(u, v, 1.0);
            adj.set(v, u, 1.0);
        }
        adj
    }

    fn triangle() -> DenseMatrix {
        graph_from_edges(3, &[(0, 1), (1, 2), (0, 2)])
    }

    // Nodes a..g as 0..6.
    fn seven_node_example() -> DenseMatrix {
        graph_from_edges(
            7,
            &[(0, 1), (0, 3), (0, 5), (1, 2), (1, 5), (1, 6), (3, 4), (4, 5)],
        )
    }

    #[test]
    fn seven_node_graph_has_ten_paths_from_node_zero() {
        let paths = enumerate_rooted_paths(&seven_node_example(), 0, 3);
        let expected: Vec<Vec<usize>> = vec![
            vec![0],
            vec![0, 1],
            vec![0, 1, 2],
            vec![0, 1, 5],
            vec![0, 1, 6],
            vec![0, 3],
            vec![0, 3, 4],
            vec![0, 5],
            vec![0, 5, 1],
            vec![0, 5, 4],
        ];
        let got: Vec<Vec<usize>> = paths.into_iter().map(|p| p.nodes).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn triangle_has_five_paths() {
        let paths = enumerate_rooted_paths(&triangle(), 0, 3);
        assert_eq!(paths.len(), 5);
    }

    #[test]
    fn count_formula_agrees_on_sparse_roots() {
        // Path graph v0-v1-v2-v3-v4 from the middle: no 4-node path fits
        // on either arm, and the product sees the same zero.
        let p5 = graph_from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let report = count_rooted_paths(&p5, 2, 4);
        assert!(report.used_formula);
        assert_eq!(report.estimate, 0);
        assert_eq!(report.exact, 0);

        // Star leaf: the walk dies two hops in.
        let star = graph_from_edges(4, &[(0, 1), (0, 2), (0, 3)]);
        let report = count_rooted_paths(&star, 1, 4);
        assert!(report.agrees());
        assert_eq!(report.exact, 0);
    }

    #[test]
    fn count_formula_overcounts_on_dense_roots() {
        // K4: six true 4-node paths per root, but the product multiplies
        // per-hop option counts as if they were independent.
        let k4 = graph_from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let report = count_rooted_paths(&k4, 0, 4);
        assert_eq!(report.exact, 6);
        assert_eq!(report.estimate, 108);
        assert!(!report.agrees());
    }

    #[test]
    fn count_without_formula_reports_exact_for_other_lengths() {
        let report = count_rooted_paths(&triangle(), 0, 3);
        assert!(!report.used_formula);
        assert_eq!(report.exact, 2); // 0-1-2 and 0-2-1
        assert!(report.agrees());
    }

    #[test]
    fn sampling_with_enough_candidates_gives_distinct_paths() {
        let sample = sample_epoch(&seven_node_example(), 3, 4, 7).unwrap();
        for paths in &sample.per_node {
            assert_eq!(paths.len(), 4);
            let distinct: HashSet<_> = paths.iter().collect();
            assert_eq!(distinct.len(), 4);
        }
    }

    #[test]
    fn round_robin_hits_every_candidate_equally() {
        // A lone edge has exactly two rooted paths per node; l = 12 must
        // repeat each exactly six times.
        let edge = graph_from_edges(2, &[(0, 1)]);
        let sample = sample_epoch(&edge, 3, 12, 3).unwrap();
        for paths in &sample.per_node {
            assert_eq!(paths.len(), 12);
            let mut counts = std::collections::HashMap::new();
            for p in paths {
                *counts.entry(p.clone()).or_insert(0usize) += 1;
            }
            assert_eq!(counts.len(), 2);
            assert!(counts.values().all(|&c| c == 6));
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let g = seven_node_example();
        let a = sample_epoch(&g, 3, 5, 11).unwrap();
        let b = sample_epoch(&g, 3, 5, 11).unwrap();
        for (x, y) in a.per_node.iter().zip(b.per_node.iter()) {
            assert_eq!(x, y);
        }
        let c = sample_epoch(&g, 3, 5, 12).unwrap();
        assert!(a
            .per_node
            .iter()
            .zip(c.per_node.iter())
            .any(|(x, y)| x != y));
    }

    #[test]
    fn exhaustive_cap_is_enforced() {
        let err = exhaustive_sample(&triangle(), 3, 4).unwrap_err();
        assert!(matches!(err, EngineError::Resource { .. }));
        let ok = exhaustive_sample(&triangle(), 3, 5).unwrap();
        assert_eq!(ok.per_node[0].len(), 5);
    }

    #[test]
    fn features_are_concatenated_and_zero_padded() {
        let feats = DenseMatrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let paths = vec![
            RootedPath { nodes: vec![2] },
            RootedPath { nodes: vec![2, 0, 1] },
        ];
        let m = path_feature_matrix(&paths, &feats, 3).unwrap();
        assert_eq!(m.shape(), (2, 6));
        assert_eq!(m.row(0), &[5.0, 6.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[5.0, 6.0, 1.0, 2.0, 3.0, 4.0]);
    }

    proptest! {
        /// Invariants of enumeration on random graphs: paths are simple,
        /// rooted, within the node budget, mutually distinct, and every
        /// consecutive pair is an edge.
        #[test]
        fn enumeration_invariants(
            n in 2usize..8,
            edge_bits in proptest::collection::vec(any::<bool>(), 28),
            t in 1usize..5,
        ) {
            let mut adj = DenseMatrix::zeros(n, n);
            let mut bit = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if edge_bits[bit % edge_bits.len()] {
                        adj.set(i, j, 1.0);
                        adj.set(j, i, 1.0);
                    }
                    bit += 1;
                }
            }
            for root in 0..n {
                let paths = enumerate_rooted_paths(&adj, root, t);
                let mut seen = HashSet::new();
                for p in &paths {
                    prop_assert!(p.len() >= 1 && p.len() <= t);
                    prop_assert_eq!(p.nodes[0], root);
                    let distinct: HashSet<_> = p.nodes.iter().collect();
                    prop_assert_eq!(distinct.len(), p.len());
                    for w in p.nodes.windows(2) {
                        prop_assert!(adj.get(w[0], w[1]) != 0.0);
                    }
                    prop_assert!(seen.insert(p.nodes.clone()));
                }
            }
        }

        /// Sampled paths always come from the candidate set.
        #[test]
        fn samples_are_valid_candidates(seed in 0u64..1000) {
            let g = seven_node_example();
            let sample = sample_epoch(&g, 3, 6, seed).unwrap();
            for (node, paths) in sample.per_node.iter().enumerate() {
                let candidates: HashSet<Vec<usize>> = enumerate_rooted_paths(&g, node, 3)
                    .into_iter()
                    .map(|p| p.nodes)
                    .collect();
                for p in paths {
                    prop_assert!(candidates.contains(&p.nodes));
                }
            }
        }
    }
}
