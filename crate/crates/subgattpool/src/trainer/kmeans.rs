//! K-means++ clustering and label-matching accuracy.

use crate::error::{EngineError, Result};
use crate::numcore::DenseMatrix;
use crate::rng::{stream, tag};
use rand::Rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared distance; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// D²-weighted seeding, then Lloyd iterations until the largest centroid
/// move drops under 1e-8 (or 100 iterations). Returns assignments and
/// within-cluster sum of squares.
fn lloyd_once(
    points: &DenseMatrix,
    k: usize,
    rng: &mut impl Rng,
) -> (Vec<usize>, f64) {
    let m = points.rows();
    let dim = points.cols();

    let mut centroids: Vec<Vec<f64>> = vec![points.row(rng.gen_range(0..m)).to_vec()];
    while centroids.len() < k {
        let weights: Vec<f64> = (0..m)
            .map(|i| nearest(points.row(i), &centroids).1)
            .collect();
        let total: f64 = weights.iter().sum();
        let chosen = if total > 0.0 {
            let mut draw = rng.gen::<f64>() * total;
            let mut pick = m - 1;
            for (i, &w) in weights.iter().enumerate() {
                draw -= w;
                if draw <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining points coincide with a centroid.
            rng.gen_range(0..m)
        };
        centroids.push(points.row(chosen).to_vec());
    }

    let mut assignments = vec![0usize; m];
    for _ in 0..100 {
        for i in 0..m {
            assignments[i] = nearest(points.row(i), &centroids).0;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for i in 0..m {
            counts[assignments[i]] += 1;
            for (s, &v) in sums[assignments[i]].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // Empty cluster keeps its centroid.
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift < 1e-8 {
            break;
        }
    }
    for i in 0..m {
        assignments[i] = nearest(points.row(i), &centroids).0;
    }
    let wcss = (0..m)
        .map(|i| sq_dist(points.row(i), &centroids[assignments[i]]))
        .sum();
    (assignments, wcss)
}

/// Cluster the rows of `points` into `k` groups; the best of `restarts`
/// independent runs by within-cluster sum of squares wins (earliest restart
/// on ties). Deterministic per seed.
pub fn kmeanspp_cluster(
    points: &DenseMatrix,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k == 0 || k > points.rows() {
        return Err(EngineError::contract(
            "kmeanspp",
            format!("k = {k} with {} points", points.rows()),
        ));
    }
    if restarts == 0 {
        return Err(EngineError::contract("kmeanspp", "restarts must be at least 1"));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..restarts {
        let mut rng = stream(seed, &[tag::KMEANS, restart as u64]);
        let (assignments, wcss) = lloyd_once(points, k, &mut rng);
        if best.as_ref().map_or(true, |(_, b)| wcss < *b) {
            best = Some((assignments, wcss));
        }
    }
    Ok(best.expect("at least one restart").0)
}

/// Unsupervised accuracy: the best mean agreement over all ways of matching
/// cluster ids to class labels, found by exact assignment on the confusion
/// matrix (subset dynamic program).
pub fn clustering_accuracy(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(EngineError::contract(
            "clustering_accuracy",
            format!("{} assignments vs {} labels", assignments.len(), labels.len()),
        ));
    }
    if assignments.is_empty() {
        return Err(EngineError::contract("clustering_accuracy", "empty input"));
    }
    let clusters = assignments.iter().max().unwrap() + 1;
    let classes = labels.iter().max().unwrap() + 1;
    let side = clusters.max(classes);
    if side > 20 {
        return Err(EngineError::contract(
            "clustering_accuracy",
            format!("{side} ids exceed the exact-matching limit of 20"),
        ));
    }
    // Square weight table, padded with zero-count rows/columns so the
    // matching is always a permutation.
    let mut counts = vec![vec![0u64; side]; side];
    for (&a, &l) in assignments.iter().zip(labels) {
        counts[a][l] += 1;
    }
    // dp[mask] = best agreement matching the first popcount(mask) clusters
    // to the class set in mask.
    let mut dp = vec![0u64; 1 << side];
    for mask in 1usize..(1 << side) {
        let row = (mask.count_ones() - 1) as usize;
        for class in 0..side {
            if mask & (1 << class) != 0 {
                dp[mask] = dp[mask].max(dp[mask ^ (1 << class)] + counts[row][class]);
            }
        }
    }
    Ok(dp[(1 << side) - 1] as f64 / assignments.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob_data() -> (DenseMatrix, Vec<usize>) {
        // Two tight blobs centred far apart.
        let mut rng = stream(42, &[99]);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let center = if i % 2 == 0 { 10.0 } else { -10.0 };
            labels.push(i % 2);
            for _ in 0..3 {
                data.push(center + rng.gen_range(-0.5..0.5));
            }
        }
        (DenseMatrix::new(30, 3, data).unwrap(), labels)
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (points, labels) = blob_data();
        let assignments = kmeanspp_cluster(&points, 2, 10, 0).unwrap();
        assert_eq!(clustering_accuracy(&assignments, &labels).unwrap(), 1.0);
    }

    #[test]
    fn k_equals_m_gives_zero_inertia() {
        let points = DenseMatrix::new(4, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0]).unwrap();
        let assignments = kmeanspp_cluster(&points, 4, 3, 1).unwrap();
        let distinct: std::collections::HashSet<_> = assignments.iter().collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn duplicate_points_cluster_stably() {
        let points = DenseMatrix::new(6, 1, vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        let a = kmeanspp_cluster(&points, 2, 5, 3).unwrap();
        let b = kmeanspp_cluster(&points, 2, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], a[1]);
        assert_eq!(a[3], a[4]);
        assert_ne!(a[0], a[3]);
    }

    #[test]
    fn k_larger_than_point_count_is_rejected() {
        let points = DenseMatrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(kmeanspp_cluster(&points, 3, 1, 0).is_err());
        assert!(kmeanspp_cluster(&points, 0, 1, 0).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let labels = vec![0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&labels, &labels).unwrap(), 1.0);
        let relabeled = vec![1, 1, 0, 0];
        assert_eq!(clustering_accuracy(&relabeled, &labels).unwrap(), 1.0);
        let noisy = vec![1, 1, 0, 1];
        assert_eq!(clustering_accuracy(&noisy, &labels).unwrap(), 0.75);
        assert!(clustering_accuracy(&labels[..3], &labels).is_err());
    }

    /// Independent check: try every permutation of cluster ids.
    fn brute_force_accuracy(assignments: &[usize], labels: &[usize]) -> f64 {
        let side = assignments
            .iter()
            .chain(labels)
            .max()
            .unwrap()
            + 1;
        let ids: Vec<usize> = (0..side).collect();
        let mut best = 0usize;
        permute(&ids, &mut Vec::new(), &mut |perm| {
            let hits = assignments
                .iter()
                .zip(labels)
                .filter(|&(&a, &l)| perm[a] == l)
                .count();
            best = best.max(hits);
        });
        best as f64 / assignments.len() as f64
    }

    fn permute(rest: &[usize], chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if rest.is_empty() {
            visit(chosen);
            return;
        }
        for (i, &x) in rest.iter().enumerate() {
            let mut remaining = rest.to_vec();
            remaining.remove(i);
            chosen.push(x);
            permute(&remaining, chosen, visit);
            chosen.pop();
        }
    }

    #[test]
    fn matching_agrees_with_brute_force_on_random_instances() {
        let mut rng = stream(7, &[123]);
        for case in 0..50 {
            let classes = rng.gen_range(2..=6);
            let n = rng.gen_range(2..=40);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
            let assignments: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
            let exact = clustering_accuracy(&assignments, &labels).unwrap();
            let brute = brute_force_accuracy(&assignments, &labels);
            assert_eq!(exact, brute, "case {case}");
        }
    }
}
