//! Graph embeddings feeding k-means: invariance of embedding rows under
//! node relabeling, class structure in trained embeddings, and
//! best-of-restarts behavior.

use subgattpool::graphdata::{clique_graph_dataset, GraphDataset};
use subgattpool::netpool::NetworkConfig;
use subgattpool::numcore::DenseMatrix;
use subgattpool::trainer::{
    clustering_accuracy, embed_graphs, kmeanspp_cluster, train, EmbedPaths, TrainConfig,
};

#[test]
fn embedding_rows_are_invariant_under_node_relabeling() {
    let base = clique_graph_dataset(6, 136).unwrap();
    let perm = [5, 2, 7, 0, 3, 6, 1, 4];
    let graphs = vec![
        base.graphs[0].clone(),
        base.graphs[0].permute(&perm).unwrap(),
        base.graphs[30].clone(),
        base.graphs[30].permute(&perm).unwrap(),
    ];
    let dataset = GraphDataset {
        name: "permuted-pairs".into(),
        graphs,
        num_classes: base.num_classes,
        feature_dim: base.feature_dim,
    };
    let mut config =
        NetworkConfig::new(dataset.feature_dim, dataset.num_classes, 8);
    config.hidden_dim = 8;
    let params = subgattpool::netpool::ModelParams::init(&config, 3).unwrap();
    let rows = embed_graphs(
        &dataset,
        &config,
        &params,
        EmbedPaths::Exhaustive { cap: 100_000 },
    )
    .unwrap();
    for pair in [(0, 1), (2, 3)] {
        let mut diff: f64 = 0.0;
        for j in 0..rows.cols() {
            diff = diff.max((rows.get(pair.0, j) - rows.get(pair.1, j)).abs());
        }
        assert!(
            diff < 1e-8,
            "graphs {pair:?} are the same graph relabeled but rows differ by {diff:.3e}"
        );
    }
}

#[test]
fn trained_embeddings_recover_the_synthetic_classes() {
    let dataset = clique_graph_dataset(7, 136).unwrap();
    let mut config =
        NetworkConfig::new(dataset.feature_dim, dataset.num_classes, dataset.max_nodes());
    config.hidden_dim = 8;
    config.path_len = 4;
    config.paths_per_node = 8;
    let indices: Vec<usize> = (0..dataset.len()).collect();
    let train_config = TrainConfig {
        epochs: 60,
        batch_size: 4,
        val_fraction: 0.0,
        ..TrainConfig::new(19)
    };
    let outcome = train(&dataset, &indices, &config, &train_config).unwrap();
    let embeddings = embed_graphs(
        &dataset,
        &config,
        &outcome.params,
        EmbedPaths::Exhaustive { cap: 100_000 },
    )
    .unwrap();
    assert_eq!(embeddings.rows(), dataset.len());
    assert_eq!(embeddings.cols(), config.hidden_dim);

    let assignments = kmeanspp_cluster(&embeddings, 2, 10, 5).unwrap();
    let accuracy = clustering_accuracy(&assignments, &dataset.labels()).unwrap();
    assert!(
        accuracy >= 0.8,
        "clusters recover classes at {accuracy:.2}, expected at least 0.8"
    );
}

fn wcss(points: &DenseMatrix, assignments: &[usize], k: usize) -> f64 {
    let mut sums = vec![vec![0.0; points.cols()]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for j in 0..points.cols() {
            sums[a][j] += points.get(i, j);
        }
    }
    let mut total = 0.0;
    for (i, &a) in assignments.iter().enumerate() {
        for j in 0..points.cols() {
            let centroid = sums[a][j] / counts[a] as f64;
            total += (points.get(i, j) - centroid).powi(2);
        }
    }
    total
}

#[test]
fn more_restarts_never_worsen_the_objective() {
    // Deliberately awkward instance: three tight pairs plus an outlier, so
    // a bad seeding is possible and extra restarts can only help.
    let data = vec![
        0.0, 0.0, 0.1, 0.0, 5.0, 5.0, 5.1, 5.0, 0.0, 5.0, 0.1, 5.0, 20.0, 20.0,
    ];
    let points = DenseMatrix::new(7, 2, data).unwrap();
    for seed in 0..10 {
        let one = kmeanspp_cluster(&points, 3, 1, seed).unwrap();
        let many = kmeanspp_cluster(&points, 3, 8, seed).unwrap();
        assert!(
            wcss(&points, &many, 3) <= wcss(&points, &one, 3) + 1e-12,
            "seed {seed}: more restarts worsened the objective"
        );
    }
}
