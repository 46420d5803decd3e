//! Synthetic two-community clique-detection dataset.
//!
//! Every graph has eight nodes split into communities {0..3} and {4..7}
//! joined by a single uniformly chosen bridge edge. Positive graphs plant a
//! complete 4-clique on one community (the other stays connected but
//! incomplete); negative graphs keep both communities connected with three
//! to five of the six possible edges, so no 4-clique can occur anywhere:
//! a 4-subset spanning both communities always misses cross edges.

use super::{degree_features, remap_labels, Graph, GraphDataset, RawGraph};
use crate::error::{EngineError, Result};
use crate::numcore::DenseMatrix;
use crate::rng::{stream, tag};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dataset name used for serialized files and results.
pub const SYNTHETIC_NAME: &str = "SYNTHETIC";

const NUM_GRAPHS: usize = 50;
const NUM_POSITIVES: usize = 25;
const NODES: usize = 8;
const COMMUNITY: usize = 4;

/// Sidecar describing how a serialized synthetic dataset was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticMeta {
    pub seed: u64,
    pub num_graphs: usize,
    pub positives: usize,
}

fn community_pairs(base: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(6);
    for i in 0..COMMUNITY {
        for j in (i + 1)..COMMUNITY {
            pairs.push((base + i, base + j));
        }
    }
    pairs
}

fn is_connected(nodes: &[usize], adj: &DenseMatrix) -> bool {
    let mut seen = vec![false; nodes.len()];
    let mut queue = vec![0usize];
    seen[0] = true;
    while let Some(i) = queue.pop() {
        for j in 0..nodes.len() {
            if !seen[j] && adj.get(nodes[i], nodes[j]) != 0.0 {
                seen[j] = true;
                queue.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Add a connected community subgraph with 3 to 5 of the 6 possible edges,
/// never the full clique. Retries the draw until connectivity holds.
fn add_random_community(adj: &mut DenseMatrix, base: usize, rng: &mut impl Rng) -> Result<()> {
    let nodes: Vec<usize> = (base..base + COMMUNITY).collect();
    for _ in 0..1000 {
        let count = rng.gen_range(3..=5usize);
        let mut pairs = community_pairs(base);
        pairs.shuffle(rng);
        let mut trial = adj.clone();
        for &(u, v) in pairs.iter().take(count) {
            trial.set(u, v, 1.0);
            trial.set(v, u, 1.0);
        }
        if is_connected(&nodes, &trial) {
            *adj = trial;
            return Ok(());
        }
    }
    Err(EngineError::contract(
        "synthetic",
        "could not sample a connected community in 1000 tries",
    ))
}

fn add_clique(adj: &mut DenseMatrix, base: usize) {
    for (u, v) in community_pairs(base) {
        adj.set(u, v, 1.0);
        adj.set(v, u, 1.0);
    }
}

/// Generate the full dataset as raw graphs. A pure function of `seed`: each
/// graph draws from its own derived stream, positives first.
pub fn generate_clique_dataset(seed: u64) -> Result<(Vec<RawGraph>, SyntheticMeta)> {
    let mut graphs = Vec::with_capacity(NUM_GRAPHS);
    for idx in 0..NUM_GRAPHS {
        let positive = idx < NUM_POSITIVES;
        let mut rng = stream(seed, &[tag::SYNTH, idx as u64]);
        let mut adj = DenseMatrix::zeros(NODES, NODES);
        if positive {
            let clique_base = if rng.gen_range(0..2u32) == 0 { 0 } else { COMMUNITY };
            let other_base = COMMUNITY - clique_base;
            add_clique(&mut adj, clique_base);
            add_random_community(&mut adj, other_base, &mut rng)?;
        } else {
            add_random_community(&mut adj, 0, &mut rng)?;
            add_random_community(&mut adj, COMMUNITY, &mut rng)?;
        }
        let u = rng.gen_range(0..COMMUNITY);
        let v = COMMUNITY + rng.gen_range(0..COMMUNITY);
        adj.set(u, v, 1.0);
        adj.set(v, u, 1.0);
        graphs.push(RawGraph {
            adjacency: adj,
            raw_label: if positive { 1 } else { -1 },
        });
    }
    Ok((
        graphs,
        SyntheticMeta {
            seed,
            num_graphs: NUM_GRAPHS,
            positives: NUM_POSITIVES,
        },
    ))
}

/// Ready-to-train dataset: raw graphs plus degree one-hot features and
/// 0-based labels (negative -1 maps to class 0, positive 1 to class 1).
pub fn clique_graph_dataset(seed: u64, degree_cap: usize) -> Result<GraphDataset> {
    let (raw, _) = generate_clique_dataset(seed)?;
    let adjacencies: Vec<DenseMatrix> = raw.iter().map(|g| g.adjacency.clone()).collect();
    let raw_labels: Vec<i64> = raw.iter().map(|g| g.raw_label).collect();
    let (labels, num_classes) = remap_labels(&raw_labels);
    let (features, feature_dim) = degree_features(&adjacencies, degree_cap);
    let graphs = adjacencies
        .into_iter()
        .zip(features)
        .zip(labels)
        .map(|((adjacency, features), label)| Graph {
            adjacency,
            features,
            label,
        })
        .collect();
    let ds = GraphDataset {
        name: SYNTHETIC_NAME.to_string(),
        graphs,
        num_classes,
        feature_dim,
    };
    ds.validate()?;
    Ok(ds)
}

/// All complete 4-node subgraphs, by exhaustive subset check.
pub fn find_4_cliques(adj: &DenseMatrix) -> Vec<[usize; 4]> {
    let n = adj.rows();
    let mut out = Vec::new();
    if n < 4 {
        return out;
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if adj.get(a, b) == 0.0 {
                continue;
            }
            for c in (b + 1)..n {
                if adj.get(a, c) == 0.0 || adj.get(b, c) == 0.0 {
                    continue;
                }
                for d in (c + 1)..n {
                    if adj.get(a, d) != 0.0 && adj.get(b, d) != 0.0 && adj.get(c, d) != 0.0 {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}
