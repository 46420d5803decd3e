//! Training, cross-validation, embedding extraction and attention reports.
//!
//! The loop minimises mean cross-entropy with Adam. Batches are formed by
//! accumulating per-graph gradients (graphs differ in node count, so there
//! is no tensor batching), paths are resampled every epoch, and a held-out
//! validation slice drives early stopping and model selection. Every random
//! choice is keyed by (seed, purpose, graph index, epoch), which makes runs
//! bitwise reproducible and lets folds train in parallel.

mod kmeans;

pub use kmeans::{clustering_accuracy, kmeanspp_cluster};

use crate::error::{EngineError, Result};
use crate::graphdata::{stratified_folds, stratified_holdout, Graph, GraphDataset};
use crate::netpool::{
    forward_graph, ForwardOptions, ForwardPass, ModelParams, NetworkConfig, PathSelection,
};
use crate::numcore::{AdamState, DenseMatrix};
use crate::rng::{mix, stream, tag};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    /// Fraction of the training split held out for model selection;
    /// 0 disables validation and early stopping.
    pub val_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.001,
            patience: 50,
            val_fraction: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(EngineError::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(EngineError::config("batch size must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(EngineError::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(EngineError::config(format!(
                "validation fraction must be in [0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Per-epoch trace of one training run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainCurves {
    /// Mean cross-entropy over the training graphs, per epoch.
    pub train_loss: Vec<f64>,
    /// Validation accuracy per epoch; empty when no validation split.
    pub val_accuracy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch (final epoch without
    /// validation).
    pub params: ModelParams,
    pub curves: TrainCurves,
    pub epochs_ran: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub epochs_ran: usize,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    pub std: f64,
    pub curves: Vec<TrainCurves>,
}

/// The JSON results artifact written by training commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsFile {
    pub dataset: String,
    pub config: ResultsConfig,
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    pub std: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

pub fn write_results(path: &std::path::Path, results: &ResultsFile) -> Result<()> {
    let text = serde_json::to_string_pretty(results)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_results(path: &std::path::Path) -> Result<ResultsFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn check_dataset(dataset: &GraphDataset, config: &NetworkConfig) -> Result<()> {
    if dataset.feature_dim != config.feature_dim {
        return Err(EngineError::contract(
            "train",
            format!(
                "dataset feature dimension {} does not match config {}",
                dataset.feature_dim, config.feature_dim
            ),
        ));
    }
    if dataset.num_classes != config.num_classes {
        return Err(EngineError::contract(
            "train",
            format!(
                "dataset has {} classes, config says {}",
                dataset.num_classes, config.num_classes
            ),
        ));
    }
    Ok(())
}

/// Forward one graph in evaluation mode (no dropout) and return the
/// predicted class; ties go to the lowest class index.
fn predict(
    config: &NetworkConfig,
    params: &ModelParams,
    graph: &Graph,
    paths: PathSelection,
) -> Result<usize> {
    let pass = forward_graph(
        config,
        params,
        graph,
        &ForwardOptions {
            paths,
            dropout_seed: None,
            collect_diagnostics: false,
        },
    )?;
    let logits = pass.tape.value(pass.logits);
    let mut best = 0;
    for c in 1..logits.cols() {
        if logits.get(0, c) > logits.get(0, best) {
            best = c;
        }
    }
    Ok(best)
}

/// Accuracy of `params` over `indices`, with one fresh path sample per graph
/// derived from `seed`.
pub fn evaluate_accuracy(
    dataset: &GraphDataset,
    indices: &[usize],
    config: &NetworkConfig,
    params: &ModelParams,
    seed: u64,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(EngineError::contract("evaluate", "empty index set"));
    }
    let mut correct = 0usize;
    for &idx in indices {
        let graph = &dataset.graphs[idx];
        let selection = PathSelection::Sampled {
            seed: mix(seed, &[tag::PATHS, idx as u64]),
        };
        if predict(config, params, graph, selection)? == graph.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Wrap tape-level non-finite failures with the epoch they occurred in;
/// structural errors pass through unchanged.
fn at_epoch(err: EngineError, epoch: usize) -> EngineError {
    match err {
        EngineError::NonFinite { op } => EngineError::Numerical {
            detail: format!("non-finite value in {op} at epoch {epoch}"),
        },
        EngineError::Numerical { detail } => EngineError::Numerical {
            detail: format!("{detail} (epoch {epoch})"),
        },
        other => other,
    }
}

/// Train on `indices` of `dataset`. Graph indices key the per-epoch path and
/// dropout streams, so a graph's sampling schedule does not depend on which
/// subset it is trained in.
pub fn train(
    dataset: &GraphDataset,
    indices: &[usize],
    config: &NetworkConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    train_config.validate()?;
    check_dataset(dataset, config)?;
    if indices.is_empty() {
        return Err(EngineError::contract("train", "empty training set"));
    }
    let seed = train_config.seed;

    let subset_labels: Vec<usize> = indices.iter().map(|&i| dataset.graphs[i].label).collect();
    let (train_pos, val_pos) = if train_config.val_fraction > 0.0 {
        stratified_holdout(&subset_labels, train_config.val_fraction, seed)?
    } else {
        ((0..indices.len()).collect(), Vec::new())
    };
    let mut train_indices: Vec<usize> = train_pos.iter().map(|&p| indices[p]).collect();
    let val_indices: Vec<usize> = val_pos.iter().map(|&p| indices[p]).collect();

    let mut params = ModelParams::init(config, seed)?;
    let mut adam = AdamState::new(train_config.learning_rate, &params.shapes());
    let num_params = params.shapes().len();

    let mut curves = TrainCurves::default();
    let mut best: Option<(ModelParams, usize, f64)> = None;
    let mut epochs_without_improvement = 0usize;
    let mut epochs_ran = 0usize;

    for epoch in 0..train_config.epochs {
        epochs_ran = epoch + 1;
        train_indices.shuffle(&mut stream(seed, &[tag::SHUFFLE, epoch as u64]));

        let mut epoch_loss = 0.0;
        for batch in train_indices.chunks(train_config.batch_size) {
            let mut grads: Vec<Option<DenseMatrix>> = vec![None; num_params];
            for &idx in batch {
                let graph = &dataset.graphs[idx];
                let opts = ForwardOptions {
                    paths: PathSelection::Sampled {
                        seed: mix(seed, &[tag::PATHS, idx as u64, epoch as u64]),
                    },
                    dropout_seed: Some(mix(seed, &[tag::DROPOUT, idx as u64, epoch as u64])),
                    collect_diagnostics: false,
                };
                let mut pass =
                    forward_graph(config, &params, graph, &opts).map_err(|e| at_epoch(e, epoch))?;
                let loss = pass
                    .tape
                    .cross_entropy_with_softmax(pass.logits, graph.label)
                    .map_err(|e| at_epoch(e, epoch))?;
                epoch_loss += pass.tape.scalar(loss);
                let scaled = pass
                    .tape
                    .scale(loss, 1.0 / batch.len() as f64)
                    .map_err(|e| at_epoch(e, epoch))?;
                pass.tape.backward(scaled).map_err(|e| at_epoch(e, epoch))?;
                for (slot, &id) in pass.param_ids.iter().enumerate() {
                    if let Some(g) = pass.tape.grad(id) {
                        match &mut grads[slot] {
                            Some(total) => total.add_assign(g)?,
                            none => *none = Some(g.clone()),
                        }
                    }
                }
            }
            let mut slots = params.flatten_mut();
            let mut refs: Vec<&mut DenseMatrix> =
                slots.iter_mut().map(|(_, m)| &mut **m).collect();
            adam.step(&mut refs, &grads).map_err(|e| at_epoch(e, epoch))?;
        }
        curves.train_loss.push(epoch_loss / train_indices.len() as f64);

        if !val_indices.is_empty() {
            let val_seed = mix(seed, &[tag::VAL_SPLIT, epoch as u64]);
            let acc = evaluate_accuracy(dataset, &val_indices, config, &params, val_seed)?;
            curves.val_accuracy.push(acc);
            let improved = best.as_ref().map_or(true, |(_, _, b)| acc > *b);
            if improved {
                best = Some((params.clone(), epoch, acc));
                epochs_without_improvement = 0;
            } else {
                epochs_without_improvement += 1;
                if epochs_without_improvement >= train_config.patience {
                    break;
                }
            }
        }
    }

    Ok(match best {
        Some((best_params, best_epoch, acc)) => TrainOutcome {
            params: best_params,
            curves,
            epochs_ran,
            best_epoch,
            best_val_accuracy: Some(acc),
        },
        None => TrainOutcome {
            params,
            curves,
            epochs_ran,
            best_epoch: epochs_ran.saturating_sub(1),
            best_val_accuracy: None,
        },
    })
}

fn fold_train_config(base: &TrainConfig, fold: usize) -> TrainConfig {
    TrainConfig {
        seed: mix(base.seed, &[tag::FOLD, fold as u64]),
        ..base.clone()
    }
}

fn run_fold(
    dataset: &GraphDataset,
    fold: usize,
    test_indices: &[usize],
    config: &NetworkConfig,
    train_config: &TrainConfig,
) -> Result<(FoldResult, TrainCurves)> {
    let in_test = {
        let mut mask = vec![false; dataset.len()];
        for &i in test_indices {
            mask[i] = true;
        }
        mask
    };
    let train_indices: Vec<usize> = (0..dataset.len()).filter(|&i| !in_test[i]).collect();
    let fold_config = fold_train_config(train_config, fold);
    let outcome = train(dataset, &train_indices, config, &fold_config)?;
    let accuracy =
        evaluate_accuracy(dataset, test_indices, config, &outcome.params, fold_config.seed)?;
    Ok((
        FoldResult {
            fold,
            accuracy,
            epochs_ran: outcome.epochs_ran,
        },
        outcome.curves,
    ))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Stratified k-fold cross-validation; each fold trains independently with
/// its own derived seed. `jobs` > 1 runs folds on that many threads (0 uses
/// the rayon default); results are identical for any `jobs` value.
pub fn cross_validate(
    dataset: &GraphDataset,
    config: &NetworkConfig,
    train_config: &TrainConfig,
    k: usize,
    jobs: usize,
) -> Result<CvResult> {
    let folds = stratified_folds(&dataset.labels(), k, train_config.seed)?;
    let run = |(fold, test_indices): (usize, &Vec<usize>)| {
        run_fold(dataset, fold, test_indices, config, train_config).map_err(|e| {
            EngineError::Numerical {
                detail: format!("fold {fold} failed: {e}"),
            }
        })
    };
    let results: Vec<(FoldResult, TrainCurves)> = if jobs == 1 {
        folds.iter().enumerate().map(run).collect::<Result<_>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| EngineError::Resource {
                detail: format!("cannot build thread pool: {e}"),
            })?;
        pool.install(|| {
            folds
                .par_iter()
                .enumerate()
                .map(run)
                .collect::<Result<Vec<_>>>()
        })?
    };
    let (folds, curves): (Vec<FoldResult>, Vec<TrainCurves>) = results.into_iter().unzip();
    let accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    Ok(CvResult {
        folds,
        mean,
        std,
        curves,
    })
}

/// Path strategy for whole-dataset evaluation jobs.
#[derive(Debug, Clone, Copy)]
pub enum EmbedPaths {
    /// Per-graph sample derived from one base seed.
    Sampled { seed: u64 },
    /// Exhaustive candidate set per node, bounded by `cap`.
    Exhaustive { cap: usize },
}

impl EmbedPaths {
    fn for_graph(self, idx: usize) -> PathSelection {
        match self {
            EmbedPaths::Sampled { seed } => PathSelection::Sampled {
                seed: mix(seed, &[tag::PATHS, idx as u64]),
            },
            EmbedPaths::Exhaustive { cap } => PathSelection::Exhaustive { cap },
        }
    }
}

/// Evaluation-mode graph representations, one row per graph in dataset
/// order.
pub fn embed_graphs(
    dataset: &GraphDataset,
    config: &NetworkConfig,
    params: &ModelParams,
    paths: EmbedPaths,
) -> Result<DenseMatrix> {
    check_dataset(dataset, config)?;
    let mut out = DenseMatrix::zeros(dataset.len(), config.hidden_dim);
    for (idx, graph) in dataset.graphs.iter().enumerate() {
        let pass = forward_graph(
            config,
            params,
            graph,
            &ForwardOptions {
                paths: paths.for_graph(idx),
                dropout_seed: None,
                collect_diagnostics: false,
            },
        )?;
        let repr = pass.tape.value(pass.graph_repr);
        for c in 0..config.hidden_dim {
            out.set(idx, c, repr.get(c, 0));
        }
    }
    Ok(out)
}

/// One path's attention weights, one value per head.
#[derive(Debug, Clone, Serialize)]
pub struct AttentionRow {
    pub path: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Per-path attention of one node in one graph, sorted by weight.
#[derive(Debug, Clone, Serialize)]
pub struct AttentionReport {
    pub node: usize,
    pub heads: usize,
    /// Rows sorted descending by mean weight across heads.
    pub rows: Vec<AttentionRow>,
}

impl AttentionReport {
    /// The path the node attends to most (by mean weight across heads).
    pub fn top_path(&self) -> &[usize] {
        &self.rows[0].path
    }
}

/// Attention table of the first embedding layer for `node`, from a fresh
/// evaluation-mode forward pass.
pub fn attention_report(
    config: &NetworkConfig,
    params: &ModelParams,
    graph: &Graph,
    node: usize,
    paths: PathSelection,
) -> Result<AttentionReport> {
    if node >= graph.num_nodes() {
        return Err(EngineError::contract(
            "attention_report",
            format!("node {node} out of range for {} nodes", graph.num_nodes()),
        ));
    }
    let pass: ForwardPass = forward_graph(
        config,
        params,
        graph,
        &ForwardOptions {
            paths,
            dropout_seed: None,
            collect_diagnostics: true,
        },
    )?;
    let diag = pass.diagnostics.expect("diagnostics requested");
    let per_head = &diag.path_attention[node];
    let heads = per_head.len();
    let mut rows: Vec<AttentionRow> = pass.sample.per_node[node]
        .iter()
        .enumerate()
        .map(|(p, path)| AttentionRow {
            path: path.nodes.clone(),
            weights: per_head.iter().map(|alpha| alpha.get(p, 0)).collect(),
        })
        .collect();
    let mean = |r: &AttentionRow| r.weights.iter().sum::<f64>() / heads as f64;
    rows.sort_by(|a, b| mean(b).partial_cmp(&mean(a)).expect("finite weights"));
    Ok(AttentionReport { node, heads, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::clique_graph_dataset;

    fn synthetic() -> GraphDataset {
        clique_graph_dataset(1, 136).unwrap()
    }

    fn tiny_net(ds: &GraphDataset) -> NetworkConfig {
        let mut c = NetworkConfig::new(ds.feature_dim, ds.num_classes, ds.max_nodes());
        c.hidden_dim = 8;
        c.paths_per_node = 4;
        c
    }

    #[test]
    fn first_epoch_loss_is_near_the_uniform_baseline() {
        let ds = synthetic();
        let net = tiny_net(&ds);
        let mut cfg = TrainConfig::new(0);
        cfg.epochs = 1;
        cfg.val_fraction = 0.0;
        let indices: Vec<usize> = (0..ds.len()).collect();
        let outcome = train(&ds, &indices, &net, &cfg).unwrap();
        let baseline = (ds.num_classes as f64).ln();
        assert!(
            (outcome.curves.train_loss[0] - baseline).abs() < 0.5,
            "first-epoch loss {} vs ln({}) = {}",
            outcome.curves.train_loss[0],
            ds.num_classes,
            baseline
        );
    }

    #[test]
    fn single_graph_is_memorized() {
        let ds = synthetic();
        let net = tiny_net(&ds);
        let mut cfg = TrainConfig::new(3);
        cfg.epochs = 300;
        cfg.learning_rate = 0.01;
        cfg.val_fraction = 0.0;
        let outcome = train(&ds, &[0], &net, &cfg).unwrap();
        let final_loss = *outcome.curves.train_loss.last().unwrap();
        assert!(final_loss < 1e-2, "final loss {final_loss}");
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let ds = synthetic();
        let net = tiny_net(&ds);
        let mut cfg = TrainConfig::new(5);
        cfg.epochs = 3;
        let indices: Vec<usize> = (0..20).collect();
        let a = train(&ds, &indices, &net, &cfg).unwrap();
        let b = train(&ds, &indices, &net, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.curves.train_loss, b.curves.train_loss);
        cfg.seed = 6;
        let c = train(&ds, &indices, &net, &cfg).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn separable_dataset_reaches_full_cv_accuracy() {
        // Two classes split by the sign of a single constant node feature;
        // any useful training run must classify them perfectly.
        let mut graphs = Vec::new();
        for i in 0..12 {
            let label = i % 2;
            let sign = if label == 1 { 1.0 } else { -1.0 };
            let mut adjacency = DenseMatrix::zeros(2, 2);
            adjacency.set(0, 1, 1.0);
            adjacency.set(1, 0, 1.0);
            let features = DenseMatrix::new(2, 1, vec![sign, sign]).unwrap();
            graphs.push(Graph {
                adjacency,
                features,
                label,
            });
        }
        let ds = GraphDataset {
            name: "separable".into(),
            graphs,
            num_classes: 2,
            feature_dim: 1,
        };
        ds.validate().unwrap();
        let mut net = NetworkConfig::new(1, 2, 2);
        net.hidden_dim = 4;
        net.paths_per_node = 2;
        let mut cfg = TrainConfig::new(7);
        cfg.epochs = 60;
        cfg.learning_rate = 0.01;
        cfg.val_fraction = 0.0;
        let cv = cross_validate(&ds, &net, &cfg, 3, 1).unwrap();
        assert_eq!(cv.mean, 1.0, "fold accuracies {:?}", cv.folds);
        assert_eq!(cv.std, 0.0);
    }

    #[test]
    fn fold_results_are_identical_under_parallelism() {
        let ds = synthetic();
        let net = tiny_net(&ds);
        let mut cfg = TrainConfig::new(2);
        cfg.epochs = 2;
        let sequential = cross_validate(&ds, &net, &cfg, 5, 1).unwrap();
        let parallel = cross_validate(&ds, &net, &cfg, 5, 4).unwrap();
        let acc = |r: &CvResult| -> Vec<f64> { r.folds.iter().map(|f| f.accuracy).collect() };
        assert_eq!(acc(&sequential), acc(&parallel));
        let (mean, std) = mean_std(&acc(&sequential));
        assert!((sequential.mean - mean).abs() < 1e-12);
        assert!((sequential.std - std).abs() < 1e-12);
    }

    #[test]
    fn embeddings_have_one_row_per_graph_and_duplicates_agree() {
        let ds = synthetic();
        let net = tiny_net(&ds);
        let params = ModelParams::init(&net, 0).unwrap();
        let embedded = embed_graphs(&ds, &net, &params, EmbedPaths::Exhaustive { cap: 10_000 })
            .unwrap();
        assert_eq!(embedded.shape(), (ds.len(), net.hidden_dim));

        let mut twice = ds.clone();
        twice.graphs = vec![ds.graphs[0].clone(), ds.graphs[0].clone()];
        let rows = embed_graphs(&twice, &net, &params, EmbedPaths::Exhaustive { cap: 10_000 })
            .unwrap();
        assert_eq!(rows.row(0), rows.row(1));
    }

    #[test]
    fn attention_report_is_well_formed_untrained() {
        let ds = synthetic();
        let net = tiny_net(&ds);
        let params = ModelParams::init(&net, 9).unwrap();
        let graph = &ds.graphs[0];
        let report = attention_report(
            &net,
            &params,
            graph,
            3,
            PathSelection::Exhaustive { cap: 10_000 },
        )
        .unwrap();
        assert_eq!(report.node, 3);
        for h in 0..report.heads {
            let sum: f64 = report.rows.iter().map(|r| r.weights[h]).sum();
            assert!((sum - 1.0).abs() < 1e-9, "head {h} sums to {sum}");
        }
        for pair in report.rows.windows(2) {
            assert!(pair[0].weights[0] >= pair[1].weights[0] - 1e-12);
        }
        assert!(attention_report(
            &net,
            &params,
            graph,
            graph.num_nodes(),
            PathSelection::Exhaustive { cap: 10_000 },
        )
        .is_err());
    }

    #[test]
    fn single_path_sampling_gets_full_attention() {
        let ds = synthetic();
        let mut net = tiny_net(&ds);
        net.paths_per_node = 1;
        let params = ModelParams::init(&net, 0).unwrap();
        let report = attention_report(
            &net,
            &params,
            &ds.graphs[0],
            0,
            PathSelection::Sampled { seed: 4 },
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!((report.rows[0].weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn results_file_round_trips() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("results.json");
        let ds = synthetic();
        let results = ResultsFile {
            dataset: ds.name.clone(),
            config: ResultsConfig {
                network: tiny_net(&ds),
                train: TrainConfig::new(1),
            },
            folds: vec![FoldResult {
                fold: 0,
                accuracy: 0.75,
                epochs_ran: 12,
            }],
            mean: 0.75,
            std: 0.0,
            wall_seconds: 1.5,
        };
        write_results(&path, &results).unwrap();
        let back = read_results(&path).unwrap();
        assert_eq!(back.dataset, results.dataset);
        assert_eq!(back.folds[0].accuracy, 0.75);
        assert_eq!(back.mean, results.mean);
        let text = std::fs::read_to_string(&path).unwrap();
        for field in ["\"dataset\"", "\"config\"", "\"folds\"", "\"mean\"", "\"std\"", "\"wall_seconds\""] {
            assert!(text.contains(field), "missing {field}");
        }
    }

    #[test]
    fn non_finite_training_aborts_with_the_epoch() {
        // Features at f64::MAX overflow the first projection matmul.
        let mut adjacency = DenseMatrix::zeros(2, 2);
        adjacency.set(0, 1, 1.0);
        adjacency.set(1, 0, 1.0);
        let features =
            DenseMatrix::new(2, 4, vec![f64::MAX; 8]).unwrap();
        let ds = GraphDataset {
            name: "overflow".into(),
            graphs: vec![
                Graph {
                    adjacency: adjacency.clone(),
                    features: features.clone(),
                    label: 0,
                },
                Graph {
                    adjacency,
                    features,
                    label: 1,
                },
            ],
            num_classes: 2,
            feature_dim: 4,
        };
        let mut net = NetworkConfig::new(4, 2, 2);
        net.hidden_dim = 4;
        net.paths_per_node = 2;
        let mut cfg = TrainConfig::new(0);
        cfg.epochs = 2;
        cfg.val_fraction = 0.0;
        let err = train(&ds, &[0, 1], &net, &cfg).unwrap_err();
        match err {
            EngineError::Numerical { detail } => {
                assert!(detail.contains("epoch 0"), "detail: {detail}")
            }
            other => panic!("expected numerical abort, got {other}"),
        }
    }
}
