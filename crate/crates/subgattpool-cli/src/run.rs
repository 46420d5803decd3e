//! Command execution over resolved manifests.

use crate::manifest::{
    write_manifest, ClusterSpec, CommandConfig, InspectSpec, RunManifest, SampleSpec, SweepSpec,
    TrainSpec,
};
use std::path::{Path, PathBuf};
use std::time::Instant;
use subgattpool::graphdata::GraphDataset;
use subgattpool::netpool::{
    load_checkpoint, save_checkpoint, NetworkConfig, PathSelection,
};
use subgattpool::rng::{mix, tag};
use subgattpool::trainer::{
    attention_report, clustering_accuracy, cross_validate, embed_graphs, evaluate_accuracy,
    kmeanspp_cluster, mean_std, train, write_results, EmbedPaths, FoldResult, ResultsConfig,
    ResultsFile, TrainConfig,
};
use subgattpool::{EngineError, Result};

fn out_path(manifest: &RunManifest, name: &str) -> PathBuf {
    Path::new(&manifest.output_dir).join(name)
}

impl SampleSpec {
    fn selection(self) -> PathSelection {
        match self {
            SampleSpec::Exhaustive { cap } => PathSelection::Exhaustive { cap },
            SampleSpec::Sampled { seed } => PathSelection::Sampled { seed },
        }
    }

    fn embed_paths(self) -> EmbedPaths {
        match self {
            SampleSpec::Exhaustive { cap } => EmbedPaths::Exhaustive { cap },
            SampleSpec::Sampled { seed } => EmbedPaths::Sampled { seed },
        }
    }
}

/// Run a manifest's command; artifacts land in its output directory.
pub fn execute(manifest: &RunManifest) -> Result<()> {
    write_manifest(manifest)?;
    match &manifest.config {
        CommandConfig::Train(spec) => run_train(manifest, spec),
        CommandConfig::Cluster(spec) => run_cluster(manifest, spec),
        CommandConfig::Inspect(spec) => run_inspect(manifest, spec),
        CommandConfig::Sweep(spec) => run_sweep(manifest, spec),
    }
}

fn run_train(manifest: &RunManifest, spec: &TrainSpec) -> Result<()> {
    let started = Instant::now();
    let dataset = spec.dataset.load()?;
    let folds = if spec.folds >= 2 {
        let cv = cross_validate(&dataset, &spec.network, &spec.train, spec.folds, spec.jobs)?;
        cv.folds
    } else {
        let indices: Vec<usize> = (0..dataset.len()).collect();
        let outcome = train(&dataset, &indices, &spec.network, &spec.train)?;
        // No held-out test exists for a single fit; report the accuracy of
        // the selected model on its own training data.
        let accuracy = match outcome.best_val_accuracy {
            Some(acc) => acc,
            None => evaluate_accuracy(
                &dataset,
                &indices,
                &spec.network,
                &outcome.params,
                spec.train.seed,
            )?,
        };
        vec![FoldResult {
            fold: 0,
            accuracy,
            epochs_ran: outcome.epochs_ran,
        }]
    };

    if !spec.skip_checkpoint {
        // The exported model is trained on the full dataset, which is what
        // downstream clustering and inspection consume.
        let indices: Vec<usize> = (0..dataset.len()).collect();
        let outcome = train(&dataset, &indices, &spec.network, &spec.train)?;
        save_checkpoint(
            &out_path(manifest, "checkpoint.json"),
            &spec.network,
            &outcome.params,
            spec.train.seed,
            outcome.epochs_ran,
        )?;
    }

    let accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let (mean, std) = mean_std(&accuracies);
    let results = ResultsFile {
        dataset: dataset.name.clone(),
        config: ResultsConfig {
            network: spec.network.clone(),
            train: spec.train.clone(),
        },
        folds,
        mean,
        std,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_results(&out_path(manifest, "results.json"), &results)?;
    println!(
        "{}: accuracy {:.4} +/- {:.4} over {} fold(s) -> {}",
        dataset.name,
        mean,
        std,
        results.folds.len(),
        manifest.output_dir
    );
    Ok(())
}

/// Checkpoint whose network shape disagrees with the dataset cannot be
/// evaluated; surface it as a checkpoint problem, not a generic contract.
fn check_compatible(config: &NetworkConfig, dataset: &GraphDataset) -> Result<()> {
    if config.feature_dim != dataset.feature_dim || config.num_classes != dataset.num_classes {
        return Err(EngineError::Checkpoint {
            detail: format!(
                "checkpoint expects feature dim {} / {} classes, dataset {} has {} / {}",
                config.feature_dim,
                config.num_classes,
                dataset.name,
                dataset.feature_dim,
                dataset.num_classes
            ),
        });
    }
    Ok(())
}

fn write_tsv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let text = rows
        .iter()
        .map(|r| r.join("\t"))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(serde::Serialize)]
struct ClusterOutput {
    dataset: String,
    clusters: usize,
    restarts: usize,
    accuracy: f64,
    wall_seconds: f64,
}

fn run_cluster(manifest: &RunManifest, spec: &ClusterSpec) -> Result<()> {
    let started = Instant::now();
    let dataset = spec.dataset.load()?;
    let (checkpoint, params) = load_checkpoint(Path::new(&spec.checkpoint))?;
    check_compatible(&checkpoint.config, &dataset)?;

    let embeddings = embed_graphs(&dataset, &checkpoint.config, &params, spec.sample.embed_paths())?;
    let labels = dataset.labels();
    let assignments = kmeanspp_cluster(&embeddings, spec.clusters, spec.restarts, spec.seed)?;
    let accuracy = clustering_accuracy(&assignments, &labels)?;

    let embedding_rows: Vec<Vec<String>> = (0..embeddings.rows())
        .map(|i| embeddings.row(i).iter().map(|v| format!("{v:?}")).collect())
        .collect();
    write_tsv(&out_path(manifest, "embeddings.tsv"), &embedding_rows)?;
    let label_rows: Vec<Vec<String>> = labels.iter().map(|l| vec![l.to_string()]).collect();
    write_tsv(&out_path(manifest, "labels.tsv"), &label_rows)?;
    let assignment_rows: Vec<Vec<String>> =
        assignments.iter().map(|a| vec![a.to_string()]).collect();
    write_tsv(&out_path(manifest, "assignments.tsv"), &assignment_rows)?;

    let output = ClusterOutput {
        dataset: dataset.name.clone(),
        clusters: spec.clusters,
        restarts: spec.restarts,
        accuracy,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    std::fs::write(
        out_path(manifest, "cluster.json"),
        serde_json::to_string_pretty(&output)? + "\n",
    )?;
    println!(
        "{}: clustering accuracy {:.4} with k = {} -> {}",
        dataset.name, accuracy, spec.clusters, manifest.output_dir
    );
    Ok(())
}

fn run_inspect(manifest: &RunManifest, spec: &InspectSpec) -> Result<()> {
    let dataset = spec.dataset.load()?;
    let (checkpoint, params) = load_checkpoint(Path::new(&spec.checkpoint))?;
    check_compatible(&checkpoint.config, &dataset)?;
    if spec.graph >= dataset.len() {
        return Err(EngineError::contract(
            "inspect",
            format!("graph {} out of range for {} graphs", spec.graph, dataset.len()),
        ));
    }
    let graph = &dataset.graphs[spec.graph];
    let report = attention_report(
        &checkpoint.config,
        &params,
        graph,
        spec.node,
        spec.sample.selection(),
    )?;

    let mut rows = Vec::new();
    let mut header = vec!["path".to_string()];
    header.extend((0..report.heads).map(|h| format!("head_{h}")));
    rows.push(header);
    for row in &report.rows {
        let mut cells = vec![row
            .path
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-")];
        cells.extend(row.weights.iter().map(|w| format!("{w:?}")));
        rows.push(cells);
    }
    let mut sums = vec!["TOTAL".to_string()];
    for h in 0..report.heads {
        let sum: f64 = report.rows.iter().map(|r| r.weights[h]).sum();
        sums.push(format!("{sum:?}"));
    }
    rows.push(sums);
    write_tsv(&out_path(manifest, "attention.tsv"), &rows)?;
    println!(
        "graph {} node {}: top path {} -> {}",
        spec.graph,
        spec.node,
        report
            .top_path()
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        manifest.output_dir
    );
    Ok(())
}

/// Apply one sweep setting to the base network config.
fn apply_axis(base: &NetworkConfig, axis: &str, value: usize) -> Result<NetworkConfig> {
    let mut config = base.clone();
    match axis {
        "T" => config.path_len = value,
        "L" => config.paths_per_node = value,
        "K" => config.hidden_dim = value,
        "subgatt-layers" => config.subgatt_layers = value,
        other => {
            return Err(EngineError::config(format!(
                "unknown sweep axis {other} (expected T, L, K or subgatt-layers)"
            )))
        }
    }
    Ok(config)
}

fn run_sweep(manifest: &RunManifest, spec: &SweepSpec) -> Result<()> {
    let dataset = spec.dataset.load()?;
    let mut rows = vec![vec![
        spec.axis.clone(),
        "mean".to_string(),
        "std".to_string(),
        "repetitions".to_string(),
    ]];
    for (i, &value) in spec.values.iter().enumerate() {
        let config = apply_axis(&spec.network, &spec.axis, value)?;
        let mut means = Vec::with_capacity(spec.repeats);
        for repeat in 0..spec.repeats {
            let train_config = TrainConfig {
                seed: mix(spec.train.seed, &[tag::REPEAT, i as u64, repeat as u64]),
                ..spec.train.clone()
            };
            let cv = cross_validate(&dataset, &config, &train_config, spec.folds, spec.jobs)?;
            means.push(cv.mean);
        }
        let (mean, std) = mean_std(&means);
        println!("{} = {value}: accuracy {mean:.4} +/- {std:.4}", spec.axis);
        rows.push(vec![
            value.to_string(),
            format!("{mean:?}"),
            format!("{std:?}"),
            spec.repeats.to_string(),
        ]);
    }
    write_tsv(&out_path(manifest, "sweep.tsv"), &rows)?;
    println!("sweep table -> {}", manifest.output_dir);
    Ok(())
}
