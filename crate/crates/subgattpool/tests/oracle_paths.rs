//! Path enumeration checked against an oracle written independently of the
//! production code: breadth-first frontier expansion with linear-scan
//! membership instead of depth-first recursion with a visited mask.

use proptest::prelude::*;
use rand::Rng;
use std::collections::HashSet;
use subgattpool::numcore::DenseMatrix;
use subgattpool::pathsampler::{enumerate_rooted_paths, sample_epoch};
use subgattpool::rng::stream;

/// All simple paths from `root` with at most `max_nodes` nodes, grown one
/// hop at a time from a frontier of shorter paths.
fn oracle_paths(adj: &DenseMatrix, root: usize, max_nodes: usize) -> Vec<Vec<usize>> {
    if max_nodes == 0 || root >= adj.rows() {
        return Vec::new();
    }
    let mut all: Vec<Vec<usize>> = vec![vec![root]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![root]];
    for _ in 1..max_nodes {
        let mut grown: Vec<Vec<usize>> = Vec::new();
        for path in &frontier {
            let tail = *path.last().unwrap();
            for next in 0..adj.cols() {
                if adj.get(tail, next) != 0.0 && !path.contains(&next) {
                    let mut longer = path.clone();
                    longer.push(next);
                    grown.push(longer);
                }
            }
        }
        if grown.is_empty() {
            break;
        }
        all.extend(grown.iter().cloned());
        frontier = grown;
    }
    all
}

fn random_adjacency(n: usize, edge_prob: f64, rng: &mut impl Rng) -> DenseMatrix {
    let mut adj = DenseMatrix::zeros(n, n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(edge_prob) {
                adj.set(u, v, 1.0);
                adj.set(v, u, 1.0);
            }
        }
    }
    adj
}

#[test]
fn enumeration_agrees_with_the_frontier_oracle() {
    let mut rng = stream(61, &[0xB1]);
    for case in 0..100 {
        let n = rng.gen_range(2..=10);
        let edge_prob = rng.gen_range(0.1..0.9);
        let adj = random_adjacency(n, edge_prob, &mut rng);
        let t = rng.gen_range(1..=4);
        for root in 0..n {
            let produced = enumerate_rooted_paths(&adj, root, t);
            let expected = oracle_paths(&adj, root, t);

            let produced_set: HashSet<Vec<usize>> =
                produced.iter().map(|p| p.nodes.clone()).collect();
            let expected_set: HashSet<Vec<usize>> = expected.iter().cloned().collect();
            assert_eq!(
                produced_set.len(),
                produced.len(),
                "case {case}: duplicate paths from root {root}"
            );
            assert_eq!(
                produced_set, expected_set,
                "case {case}: path sets differ for root {root}, t {t}"
            );
        }
    }
}

#[test]
fn round_robin_repeats_each_candidate_equally() {
    let mut adj = DenseMatrix::zeros(4, 4);
    for leaf in 1..4 {
        adj.set(0, leaf, 1.0);
        adj.set(leaf, 0, 1.0);
    }
    // Root 0 with t = 2 has candidates [0], [0,1], [0,2], [0,3]: c = 4.
    for q in [1usize, 2, 5] {
        let l = 4 * q;
        let sample = sample_epoch(&adj, 2, l, 77).unwrap();
        let chosen = &sample.per_node[0];
        assert_eq!(chosen.len(), l);
        let mut counts: Vec<usize> = Vec::new();
        let mut distinct: Vec<Vec<usize>> = Vec::new();
        for path in chosen {
            match distinct.iter().position(|p| *p == path.nodes) {
                Some(i) => counts[i] += 1,
                None => {
                    distinct.push(path.nodes.clone());
                    counts.push(1);
                }
            }
        }
        assert_eq!(distinct.len(), 4, "every candidate must appear");
        assert!(
            counts.iter().all(|&c| c == q),
            "with l = {l} each of the 4 candidates must appear {q} times, got {counts:?}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Sampled paths are always simple, rooted correctly, edge-connected
    /// and within the length budget, whatever the graph.
    #[test]
    fn sampled_paths_are_valid_rooted_simple_paths(
        n in 2usize..9,
        edges in proptest::collection::vec(any::<bool>(), 36),
        t in 1usize..5,
        l in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut adj = DenseMatrix::zeros(n, n);
        let mut idx = 0;
        for u in 0..n {
            for v in u + 1..n {
                if edges[idx % edges.len()] {
                    adj.set(u, v, 1.0);
                    adj.set(v, u, 1.0);
                }
                idx += 1;
            }
        }
        let sample = sample_epoch(&adj, t, l, seed).unwrap();
        prop_assert_eq!(sample.per_node.len(), n);
        for (node, paths) in sample.per_node.iter().enumerate() {
            prop_assert_eq!(paths.len(), l);
            for path in paths {
                prop_assert_eq!(path.nodes[0], node);
                prop_assert!(path.len() <= t);
                let unique: HashSet<usize> = path.nodes.iter().copied().collect();
                prop_assert_eq!(unique.len(), path.len());
                for pair in path.nodes.windows(2) {
                    prop_assert!(adj.get(pair[0], pair[1]) != 0.0);
                }
            }
        }
    }
}
