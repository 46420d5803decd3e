//! Run manifests: the full resolved description of one command.
//!
//! A manifest is written into the output directory before any computation
//! starts, and `replay` re-executes a stored manifest verbatim, so every
//! artifact is a pure function of its manifest (modulo the measured
//! `wall_seconds` field in results files).

use serde::{Deserialize, Serialize};
use std::path::Path;
use subgattpool::graphdata::{clique_graph_dataset, load_tu_dataset, GraphDataset};
use subgattpool::netpool::NetworkConfig;
use subgattpool::trainer::TrainConfig;
use subgattpool::{EngineError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// Filesystem inputs (dataset directory, checkpoint), already resolved.
    pub inputs: Vec<String>,
    pub output_dir: String,
    pub config: CommandConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CommandConfig {
    Train(TrainSpec),
    Cluster(ClusterSpec),
    Inspect(InspectSpec),
    Sweep(SweepSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    pub dataset: DatasetSpec,
    pub folds: usize,
    pub jobs: usize,
    pub skip_checkpoint: bool,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub dataset: DatasetSpec,
    pub checkpoint: String,
    pub clusters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub sample: SampleSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InspectSpec {
    pub dataset: DatasetSpec,
    pub checkpoint: String,
    pub graph: usize,
    pub node: usize,
    pub sample: SampleSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub dataset: DatasetSpec,
    /// One of "T", "L", "K", "subgatt-layers".
    pub axis: String,
    pub values: Vec<usize>,
    pub repeats: usize,
    pub folds: usize,
    pub jobs: usize,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

/// Where graphs come from; resolved paths only, so replay does not depend
/// on the invoking environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    Tu { dir: String, degree_cap: usize },
    SyntheticClique { seed: u64, degree_cap: usize },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<GraphDataset> {
        match self {
            DatasetSpec::Tu { dir, degree_cap } => load_tu_dataset(Path::new(dir), *degree_cap),
            DatasetSpec::SyntheticClique { seed, degree_cap } => {
                clique_graph_dataset(*seed, *degree_cap)
            }
        }
    }

    pub fn input_paths(&self) -> Vec<String> {
        match self {
            DatasetSpec::Tu { dir, .. } => vec![dir.clone()],
            DatasetSpec::SyntheticClique { .. } => Vec::new(),
        }
    }
}

/// How evaluation-time rooted paths are chosen.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SampleSpec {
    Exhaustive { cap: usize },
    Sampled { seed: u64 },
}

pub fn write_manifest(manifest: &RunManifest) -> Result<()> {
    let dir = Path::new(&manifest.output_dir);
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::Ingestion {
        detail: format!("cannot read manifest {}: {e}", path.display()),
    })?;
    Ok(serde_json::from_str(&text)?)
}
