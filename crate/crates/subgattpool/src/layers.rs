//! Network building blocks recorded on the autodiff tape.
//!
//! A subgraph-attention layer scores each node's sampled rooted paths,
//! aggregates them into a node vector with softmax weights, and either
//! L2-normalizes the result (embedding) or row-softmaxes it (soft cluster
//! assignment). A GIN layer refines pooled levels with weighted-sum
//! neighborhood aggregation through a two-layer MLP.

use crate::error::Result;
use crate::numcore::{DenseMatrix, Tape, TapeId};
use crate::pathsampler::{path_feature_matrix, RootedPath};

/// Tape handles of one attention head's parameters.
#[derive(Debug, Clone, Copy)]
pub struct SubGattHeadIds {
    /// Projection, `out x (t * in_dim)`.
    pub w: TapeId,
    /// Scoring vector, `out x 1`.
    pub a: TapeId,
}

/// Tape handles of one GIN layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct GinParamIds {
    /// Self-loop weight, 1x1.
    pub eps: TapeId,
    pub w1: TapeId,
    pub b1: TapeId,
    pub w2: TapeId,
    pub b2: TapeId,
}

/// Final transform of a subgraph-attention layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubGattFinish {
    /// Unit-normalize node rows; for representation layers.
    Embed,
    /// Row-softmax into a stochastic assignment; for pooling layers.
    Pool,
}

/// Result of a subgraph-attention layer.
pub struct SubGattOutput {
    /// Node matrix, `n x out_dim`.
    pub nodes: TapeId,
    /// Per node, per head: the path attention column used for aggregation.
    pub attention: Vec<Vec<TapeId>>,
}

/// Concatenate matrices side by side, folding in a balanced tree to keep
/// intermediate copies small.
pub fn hconcat_fold(tape: &mut Tape, ids: &[TapeId]) -> Result<TapeId> {
    debug_assert!(!ids.is_empty());
    if ids.len() == 1 {
        return Ok(ids[0]);
    }
    let mid = ids.len() / 2;
    let left = hconcat_fold(tape, &ids[..mid])?;
    let right = hconcat_fold(tape, &ids[mid..])?;
    tape.hconcat(left, right)
}

/// Path features as a tape constant; for layers reading raw node features,
/// where no gradient flows into the inputs.
pub fn path_features_constant(
    tape: &mut Tape,
    features: &DenseMatrix,
    paths: &[RootedPath],
    t: usize,
) -> Result<TapeId> {
    let m = path_feature_matrix(paths, features, t)?;
    Ok(tape.constant(m))
}

/// Path features assembled from an on-tape node matrix, for stacked
/// attention layers: column block `j` selects each path's `j`-th node with
/// a constant one-hot matrix, so missing tail nodes stay zero exactly like
/// the constant route.
pub fn path_features_on_tape(
    tape: &mut Tape,
    x: TapeId,
    paths: &[RootedPath],
    t: usize,
) -> Result<TapeId> {
    let n = tape.value(x).rows();
    let l = paths.len();
    let mut blocks = Vec::with_capacity(t);
    for j in 0..t {
        let mut selector = DenseMatrix::zeros(l, n);
        for (r, path) in paths.iter().enumerate() {
            if let Some(&node) = path.nodes.get(j) {
                selector.set(r, node, 1.0);
            }
        }
        let sel = tape.constant(selector);
        blocks.push(tape.matmul(sel, x)?);
    }
    hconcat_fold(tape, &blocks)
}

/// One subgraph-attention layer over precomputed per-node path features
/// (`per_node_features[i]` is `l_i x (t * in_dim)`).
pub fn subgatt_forward(
    tape: &mut Tape,
    heads: &[SubGattHeadIds],
    per_node_features: &[TapeId],
    finish: SubGattFinish,
    slope: f64,
) -> Result<SubGattOutput> {
    let mut attention = vec![Vec::with_capacity(heads.len()); per_node_features.len()];
    let mut head_blocks = Vec::with_capacity(heads.len());
    for head in heads {
        let wt = tape.transpose(head.w)?;
        let mut columns = Vec::with_capacity(per_node_features.len());
        for (i, &features) in per_node_features.iter().enumerate() {
            let projected = tape.matmul(features, wt)?;
            let scores = tape.matvec(projected, head.a)?;
            let activated = tape.leaky_relu(scores, slope)?;
            let alpha = tape.col_softmax(activated)?;
            attention[i].push(alpha);
            let projected_t = tape.transpose(projected)?;
            columns.push(tape.matmul(projected_t, alpha)?);
        }
        let stacked = hconcat_fold(tape, &columns)?;
        let nodes = tape.transpose(stacked)?;
        head_blocks.push(tape.leaky_relu(nodes, slope)?);
    }
    let combined = hconcat_fold(tape, &head_blocks)?;
    let nodes = match finish {
        SubGattFinish::Embed => tape.row_l2_normalize(combined)?,
        SubGattFinish::Pool => tape.row_softmax(combined)?,
    };
    Ok(SubGattOutput { nodes, attention })
}

/// One GIN layer: `mlp((1 + eps) x_v + sum_u A(v, u) x_u)` with weighted
/// sums, a two-layer MLP, and no output activation (the caller normalizes).
pub fn gin_forward(
    tape: &mut Tape,
    params: GinParamIds,
    x: TapeId,
    adjacency: TapeId,
    slope: f64,
) -> Result<TapeId> {
    let (n, d) = tape.value(x).shape();
    let ones_col = tape.constant(DenseMatrix::ones(n, 1));
    let ones_row = tape.constant(DenseMatrix::ones(1, d));
    let eps_col = tape.matmul(ones_col, params.eps)?;
    let eps_full = tape.matmul(eps_col, ones_row)?;
    let eps_x = tape.mul(eps_full, x)?;
    let self_term = tape.add(x, eps_x)?;
    let neighbor_term = tape.matmul(adjacency, x)?;
    let summed = tape.add(self_term, neighbor_term)?;
    let h1_lin = tape.matmul(summed, params.w1)?;
    let b1_full = tape.matmul(ones_col, params.b1)?;
    let h1_aff = tape.add(h1_lin, b1_full)?;
    let h1 = tape.leaky_relu(h1_aff, slope)?;
    let h2_lin = tape.matmul(h1, params.w2)?;
    let b2_full = tape.matmul(ones_col, params.b2)?;
    tape.add(h2_lin, b2_full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::DEFAULT_LEAKY_SLOPE;
    use crate::pathsampler::exhaustive_sample;

    fn triangle() -> DenseMatrix {
        let mut adj = DenseMatrix::zeros(3, 3);
        for (u, v) in [(0, 1), (1, 2), (0, 2)] {
            adj.set(u, v, 1.0);
            adj.set(v, u, 1.0);
        }
        adj
    }

    fn register_heads(
        tape: &mut Tape,
        heads: usize,
        out: usize,
        in_dim: usize,
        scale: f64,
    ) -> Vec<SubGattHeadIds> {
        (0..heads)
            .map(|h| {
                let w_vals: Vec<f64> = (0..out * in_dim)
                    .map(|i| ((i + h) as f64 * 0.37).sin() * scale)
                    .collect();
                let a_vals: Vec<f64> = (0..out).map(|i| ((i + h) as f64 * 0.53).cos()).collect();
                let w = tape.param(2 * h, DenseMatrix::new(out, in_dim, w_vals).unwrap());
                let a = tape.param(2 * h + 1, DenseMatrix::new(out, 1, a_vals).unwrap());
                SubGattHeadIds { w, a }
            })
            .collect()
    }

    #[test]
    fn attention_columns_are_probability_vectors() {
        let adj = triangle();
        let features = DenseMatrix::new(3, 2, vec![1.0, 0.5, -0.3, 0.8, 0.2, -1.0]).unwrap();
        let sample = exhaustive_sample(&adj, 3, 100).unwrap();
        let mut tape = Tape::new();
        let heads = register_heads(&mut tape, 2, 4, 3 * 2, 0.5);
        let feats: Vec<TapeId> = sample
            .per_node
            .iter()
            .map(|p| path_features_constant(&mut tape, &features, p, 3).unwrap())
            .collect();
        let out = subgatt_forward(&mut tape, &heads, &feats, SubGattFinish::Embed, 0.01).unwrap();
        for (node, per_head) in out.attention.iter().enumerate() {
            for &alpha in per_head {
                let v = tape.value(alpha);
                assert_eq!(v.shape(), (sample.per_node[node].len(), 1));
                assert!((v.sum() - 1.0).abs() < 1e-9);
                assert!(v.data().iter().all(|&p| p > 0.0));
            }
        }
        assert_eq!(tape.value(out.nodes).shape(), (3, 8));
    }

    #[test]
    fn embed_rows_are_unit_norm_and_pool_rows_sum_to_one() {
        let adj = triangle();
        let features = DenseMatrix::new(3, 2, vec![1.0, 0.5, -0.3, 0.8, 0.2, -1.0]).unwrap();
        let sample = exhaustive_sample(&adj, 3, 100).unwrap();
        for finish in [SubGattFinish::Embed, SubGattFinish::Pool] {
            let mut tape = Tape::new();
            let heads = register_heads(&mut tape, 1, 4, 3 * 2, 0.5);
            let feats: Vec<TapeId> = sample
                .per_node
                .iter()
                .map(|p| path_features_constant(&mut tape, &features, p, 3).unwrap())
                .collect();
            let out = subgatt_forward(&mut tape, &heads, &feats, finish, 0.01).unwrap();
            let m = tape.value(out.nodes);
            for i in 0..m.rows() {
                let row = m.row(i);
                match finish {
                    SubGattFinish::Embed => {
                        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                        assert!((norm - 1.0).abs() < 1e-9, "row norm {norm}");
                    }
                    SubGattFinish::Pool => {
                        let sum: f64 = row.iter().sum();
                        assert!((sum - 1.0).abs() < 1e-9, "row sum {sum}");
                        assert!(row.iter().all(|&v| v > 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn on_tape_features_match_constant_route() {
        let adj = triangle();
        let features =
            DenseMatrix::new(3, 2, vec![0.3, -0.6, 1.2, 0.9, -0.4, 0.7]).unwrap();
        let sample = exhaustive_sample(&adj, 3, 100).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        for paths in &sample.per_node {
            let constant = path_features_constant(&mut tape, &features, paths, 3).unwrap();
            let selected = path_features_on_tape(&mut tape, x, paths, 3).unwrap();
            assert_eq!(tape.value(constant).max_abs_diff(tape.value(selected)), 0.0);
        }
    }

    #[test]
    fn on_tape_features_propagate_gradients() {
        // A stacked layer must push gradients through the selectors into
        // the node matrix; finite differences confirm the value route.
        let paths = vec![
            RootedPath { nodes: vec![0, 1] },
            RootedPath { nodes: vec![1] },
        ];
        let base = vec![0.5, -0.2, 0.8, 0.3];
        let eval = |vals: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let x = tape.param(0, DenseMatrix::new(2, 2, vals.to_vec()).unwrap());
            let f = path_features_on_tape(&mut tape, x, &paths, 2).unwrap();
            let sq = tape.mul(f, f).unwrap();
            let rs = tape.row_sum(sq).unwrap();
            let rt = tape.transpose(rs).unwrap();
            let loss = tape.row_sum(rt).unwrap();
            tape.scalar(loss)
        };
        let mut tape = Tape::new();
        let x = tape.param(0, DenseMatrix::new(2, 2, base.clone()).unwrap());
        let f = path_features_on_tape(&mut tape, x, &paths, 2).unwrap();
        let sq = tape.mul(f, f).unwrap();
        let rs = tape.row_sum(sq).unwrap();
        let rt = tape.transpose(rs).unwrap();
        let loss = tape.row_sum(rt).unwrap();
        tape.backward(loss).unwrap();
        let analytic = tape.grad(x).unwrap().clone();
        for i in 0..4 {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i] += 1e-5;
            minus[i] -= 1e-5;
            let fd = (eval(&plus) - eval(&minus)) / 2e-5;
            let a = analytic.data()[i];
            assert!((a - fd).abs() / fd.abs().max(1.0) < 1e-6, "{a} vs {fd}");
        }
    }

    #[test]
    fn gin_layer_computes_weighted_sum_aggregation() {
        // Two nodes joined by an edge of weight 2, eps = 0.5, and identity
        // MLP weights: out = leaky(x_v * 1.5 + 2 * x_u).
        let mut tape = Tape::new();
        let eps = tape.param(0, DenseMatrix::scalar(0.5));
        let w1 = tape.param(1, DenseMatrix::identity(1));
        let b1 = tape.param(2, DenseMatrix::zeros(1, 1));
        let w2 = tape.param(3, DenseMatrix::identity(1));
        let b2 = tape.param(4, DenseMatrix::zeros(1, 1));
        let params = GinParamIds { eps, w1, b1, w2, b2 };
        let x = tape.constant(DenseMatrix::new(2, 1, vec![1.0, -1.0]).unwrap());
        let adj = tape.constant(DenseMatrix::new(2, 2, vec![0.0, 2.0, 2.0, 0.0]).unwrap());
        let out = gin_forward(&mut tape, params, x, adj, DEFAULT_LEAKY_SLOPE).unwrap();
        // Node 0: 1.5 * 1 + 2 * (-1) = -0.5, leaky -> -0.005.
        // Node 1: 1.5 * (-1) + 2 * 1 = 0.5.
        let v = tape.value(out);
        assert!((v.get(0, 0) + 0.005).abs() < 1e-12);
        assert!((v.get(1, 0) - 0.5).abs() < 1e-12);
    }
}
