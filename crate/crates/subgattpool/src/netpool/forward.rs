//! The hierarchical forward pass over one graph.
//!
//! Level 1 embeds nodes with stacked subgraph-attention layers and produces
//! a soft assignment matrix from a parallel pooling head. Each later level
//! is built by projecting the previous adjacency and embeddings through the
//! assignment, refined by GIN layers (except the last level), and summarised
//! into one vector by intra-level attention over degree-normalized structure.
//! Inter-level attention mixes the per-level summaries into the graph
//! representation feeding the linear classifier.

use super::params::ModelParams;
use super::NetworkConfig;
use crate::error::{EngineError, Result};
use crate::graphdata::Graph;
use crate::layers::{
    gin_forward, hconcat_fold, path_features_constant, path_features_on_tape, subgatt_forward,
    GinParamIds, SubGattFinish, SubGattHeadIds,
};
use crate::numcore::{DenseMatrix, Tape, TapeId};
use crate::pathsampler::{exhaustive_sample, sample_epoch, EpochSample};
use crate::rng::{stream, tag};

/// How rooted paths are chosen for the attention layers.
#[derive(Debug, Clone, Copy)]
pub enum PathSelection {
    /// Fresh per-epoch sample; pass a seed derived per graph and epoch.
    Sampled { seed: u64 },
    /// Every candidate path, bounded per node; deterministic and
    /// permutation invariant.
    Exhaustive { cap: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    pub paths: PathSelection,
    /// `Some(seed)` applies training dropout to the graph representation.
    pub dropout_seed: Option<u64>,
    pub collect_diagnostics: bool,
}

/// Values extracted from the tape for inspection and contract checking.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// Soft assignments per pooling step, `P_r` for levels `1..R-1`.
    pub assignments: Vec<DenseMatrix>,
    /// Pooled adjacencies for levels `2..=R`.
    pub adjacencies: Vec<DenseMatrix>,
    /// Pooled node features for levels `2..=R`.
    pub level_features: Vec<DenseMatrix>,
    /// Intra-level attention columns for levels `2..=R`.
    pub intra_attention: Vec<DenseMatrix>,
    /// Inter-level attention over the level summaries, `(R-1) x 1`.
    pub inter_attention: DenseMatrix,
    /// Per node, per head: path attention of the first embedding layer,
    /// aligned with the sampled paths of that node.
    pub path_attention: Vec<Vec<DenseMatrix>>,
}

/// A completed forward pass, still holding its tape so callers can attach a
/// loss and run backward.
pub struct ForwardPass {
    pub tape: Tape,
    /// `1 x num_classes`.
    pub logits: TapeId,
    /// Graph representation before the classifier, `hidden_dim x 1`.
    pub graph_repr: TapeId,
    /// Parameter leaves in canonical flattening order.
    pub param_ids: Vec<TapeId>,
    /// The level-1 paths each node attended over.
    pub sample: EpochSample,
    pub diagnostics: Option<Diagnostics>,
}

struct StructuredIds {
    embed: Vec<Vec<SubGattHeadIds>>,
    pool: Vec<SubGattHeadIds>,
    gin_embed: Vec<GinParamIds>,
    gin_pool: Vec<GinParamIds>,
    theta: TapeId,
    theta_tilde: TapeId,
    classifier_w: TapeId,
    classifier_b: TapeId,
}

/// Slice the flat id list along the canonical order into layer handles.
fn structure_ids(config: &NetworkConfig, flat: &[TapeId]) -> StructuredIds {
    let mut cursor = 0usize;
    let mut next = || {
        let id = flat[cursor];
        cursor += 1;
        id
    };
    let embed = (0..config.subgatt_layers)
        .map(|_| {
            (0..config.heads)
                .map(|_| SubGattHeadIds {
                    w: next(),
                    a: next(),
                })
                .collect()
        })
        .collect();
    let pool = vec![SubGattHeadIds {
        w: next(),
        a: next(),
    }];
    let mut gin = |count: usize| -> Vec<GinParamIds> {
        (0..count)
            .map(|_| GinParamIds {
                eps: next(),
                w1: next(),
                b1: next(),
                w2: next(),
                b2: next(),
            })
            .collect()
    };
    let gin_embed = gin(config.levels - 2);
    let gin_pool = gin(config.levels - 2);
    let ids = StructuredIds {
        embed,
        pool,
        gin_embed,
        gin_pool,
        theta: next(),
        theta_tilde: next(),
        classifier_w: next(),
        classifier_b: next(),
    };
    debug_assert_eq!(cursor, flat.len());
    ids
}

pub fn forward_graph(
    config: &NetworkConfig,
    params: &ModelParams,
    graph: &Graph,
    opts: &ForwardOptions,
) -> Result<ForwardPass> {
    if graph.features.cols() != config.feature_dim {
        return Err(EngineError::contract(
            "forward",
            format!(
                "graph features have width {}, config says {}",
                graph.features.cols(),
                config.feature_dim
            ),
        ));
    }
    let sample = match opts.paths {
        PathSelection::Sampled { seed } => sample_epoch(
            &graph.adjacency,
            config.path_len,
            config.paths_per_node,
            seed,
        )?,
        PathSelection::Exhaustive { cap } => {
            exhaustive_sample(&graph.adjacency, config.path_len, cap)?
        }
    };

    let mut tape = Tape::with_precision(config.precision);
    let flat: Vec<TapeId> = params
        .flatten()
        .into_iter()
        .enumerate()
        .map(|(slot, (_, m))| tape.param(slot, m.clone()))
        .collect();
    let ids = structure_ids(config, &flat);

    // Level 1: attention embedding stack plus the pooling head, both fed by
    // the same path sample. The raw-feature layers take constant features;
    // stacked layers rebuild them from the previous output on the tape.
    let level1_features: Vec<TapeId> = sample
        .per_node
        .iter()
        .map(|paths| path_features_constant(&mut tape, &graph.features, paths, config.path_len))
        .collect::<Result<_>>()?;
    let mut first_attention = None;
    let mut z1 = None;
    for (layer, heads) in ids.embed.iter().enumerate() {
        let feats = if layer == 0 {
            level1_features.clone()
        } else {
            let prev = z1.expect("stacked layer has a predecessor");
            sample
                .per_node
                .iter()
                .map(|paths| path_features_on_tape(&mut tape, prev, paths, config.path_len))
                .collect::<Result<_>>()?
        };
        let out = subgatt_forward(
            &mut tape,
            heads,
            &feats,
            SubGattFinish::Embed,
            config.leaky_slope,
        )?;
        if layer == 0 {
            first_attention = Some(out.attention);
        }
        z1 = Some(out.nodes);
    }
    let z1 = z1.expect("at least one embedding layer");
    let pool_out = subgatt_forward(
        &mut tape,
        &ids.pool,
        &level1_features,
        SubGattFinish::Pool,
        config.leaky_slope,
    )?;

    let a1 = tape.constant(graph.adjacency.clone());
    let mut assignment = pool_out.nodes;
    let mut prev_adjacency = a1;
    let mut prev_embedding = z1;
    let mut assignments = vec![assignment];
    let mut adjacencies = Vec::new();
    let mut level_features = Vec::new();
    let mut intra_attention = Vec::new();
    let mut level_summaries = Vec::new();
    for level in 2..=config.levels {
        let p_t = tape.transpose(assignment)?;
        let ap = tape.matmul(prev_adjacency, assignment)?;
        let a_r = tape.matmul(p_t, ap)?;
        let x_r = tape.matmul(p_t, prev_embedding)?;
        adjacencies.push(a_r);
        level_features.push(x_r);

        let norm = tape.degree_normalize(a_r)?;
        let mixed = tape.matmul(norm, x_r)?;
        let scores = tape.matvec(mixed, ids.theta)?;
        let e_r = tape.col_softmax(scores)?;
        intra_attention.push(e_r);
        let x_r_t = tape.transpose(x_r)?;
        level_summaries.push(tape.matmul(x_r_t, e_r)?);

        if level < config.levels {
            let gin_idx = level - 2;
            let z_r = gin_forward(
                &mut tape,
                ids.gin_embed[gin_idx],
                x_r,
                a_r,
                config.leaky_slope,
            )?;
            let z_r = tape.row_l2_normalize(z_r)?;
            let pooled = gin_forward(
                &mut tape,
                ids.gin_pool[gin_idx],
                x_r,
                a_r,
                config.leaky_slope,
            )?;
            assignment = tape.row_softmax(pooled)?;
            assignments.push(assignment);
            prev_adjacency = a_r;
            prev_embedding = z_r;
        }
    }

    let stacked = hconcat_fold(&mut tape, &level_summaries)?;
    let x_inter = tape.transpose(stacked)?;
    let inter_scores = tape.matvec(x_inter, ids.theta_tilde)?;
    let e_tilde = tape.col_softmax(inter_scores)?;
    let x_inter_t = tape.transpose(x_inter)?;
    let mut graph_repr = tape.matmul(x_inter_t, e_tilde)?;
    if let Some(seed) = opts.dropout_seed {
        if config.dropout > 0.0 {
            let mut rng = stream(seed, &[tag::DROPOUT]);
            graph_repr = tape.dropout(graph_repr, config.dropout, &mut rng)?;
        }
    }
    let repr_row = tape.transpose(graph_repr)?;
    let w_t = tape.transpose(ids.classifier_w)?;
    let linear = tape.matmul(repr_row, w_t)?;
    let logits = tape.add(linear, ids.classifier_b)?;

    let diagnostics = if opts.collect_diagnostics {
        Some(Diagnostics {
            assignments: assignments.iter().map(|&id| tape.value(id).clone()).collect(),
            adjacencies: adjacencies.iter().map(|&id| tape.value(id).clone()).collect(),
            level_features: level_features
                .iter()
                .map(|&id| tape.value(id).clone())
                .collect(),
            intra_attention: intra_attention
                .iter()
                .map(|&id| tape.value(id).clone())
                .collect(),
            inter_attention: tape.value(e_tilde).clone(),
            path_attention: first_attention
                .expect("first embedding layer ran")
                .iter()
                .map(|heads| heads.iter().map(|&id| tape.value(id).clone()).collect())
                .collect(),
        })
    } else {
        None
    };

    Ok(ForwardPass {
        tape,
        logits,
        graph_repr,
        param_ids: flat,
        sample,
        diagnostics,
    })
}

/// Check the probabilistic structure of one forward pass against the
/// original adjacency: assignment rows are probability vectors, pooling
/// preserves total adjacency mass, and every attention column sums to one.
pub fn verify_stochastic_contracts(pass: &ForwardPass, graph: &Graph) -> Result<()> {
    let diag = pass.diagnostics.as_ref().ok_or_else(|| {
        EngineError::contract(
            "contracts",
            "forward pass ran without diagnostics collection",
        )
    })?;
    let check_prob = |v: &[f64], what: &str, tol: f64| -> Result<()> {
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(EngineError::contract(
                "contracts",
                format!("{what} sums to {sum}, expected 1"),
            ));
        }
        if v.iter().any(|&p| p < 0.0) {
            return Err(EngineError::contract(
                "contracts",
                format!("{what} has negative entries"),
            ));
        }
        Ok(())
    };
    for (r, p) in diag.assignments.iter().enumerate() {
        for row in 0..p.rows() {
            check_prob(p.row(row), &format!("assignment {r} row {row}"), 1e-9)?;
        }
    }
    let mut prev_mass = graph.adjacency.sum();
    for (i, a) in diag.adjacencies.iter().enumerate() {
        let mass = a.sum();
        if (mass - prev_mass).abs() > 1e-6 {
            return Err(EngineError::contract(
                "contracts",
                format!(
                    "pooling level {} changed adjacency mass {prev_mass} -> {mass}",
                    i + 2
                ),
            ));
        }
        prev_mass = mass;
    }
    for (i, e) in diag.intra_attention.iter().enumerate() {
        check_prob(e.data(), &format!("intra attention at level {}", i + 2), 1e-9)?;
    }
    check_prob(diag.inter_attention.data(), "inter attention", 1e-9)?;
    for (node, heads) in diag.path_attention.iter().enumerate() {
        for (h, alpha) in heads.iter().enumerate() {
            check_prob(alpha.data(), &format!("path attention node {node} head {h}"), 1e-9)?;
        }
    }
    Ok(())
}
