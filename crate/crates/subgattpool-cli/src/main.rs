//! Command-line entry point.
//!
//! Every command resolves its arguments into a [`manifest::RunManifest`],
//! writes it into the output directory, and then executes it; `replay`
//! re-executes a stored manifest. Exit codes: 0 success, 2 usage or
//! configuration, 3 data (dataset, checkpoint, IO), 4 numerical.

mod manifest;
mod run;

use clap::{ArgGroup, Args, Parser, Subcommand};
use manifest::{
    read_manifest, ClusterSpec, CommandConfig, DatasetSpec, InspectSpec, RunManifest, SampleSpec,
    SweepSpec, TrainSpec,
};
use std::path::{Path, PathBuf};
use subgattpool::graphdata::GraphDataset;
use subgattpool::netpool::NetworkConfig;
use subgattpool::numcore::Precision;
use subgattpool::trainer::TrainConfig;
use subgattpool::{EngineError, Result};

#[derive(Parser)]
#[command(
    name = "subgattpool",
    version,
    about = "Graph classification with subgraph attention and hierarchical pooling",
    after_help = "Exit codes: 0 success, 2 usage/configuration, 3 data, 4 numerical."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated training (or a single full-data fit with --folds 1)
    Train(TrainArgs),
    /// Embed graphs with a checkpoint and cluster them with k-means++
    Cluster(ClusterArgs),
    /// Write one node's per-path attention table
    Inspect(InspectArgs),
    /// Repeat cross-validation over a grid of one hyperparameter
    Sweep(SweepArgs),
    /// Re-execute a stored run manifest
    Replay(ReplayArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("data").required(true).args(["dataset", "synthetic_clique"])))]
struct DataArgs {
    /// TU-format dataset directory, or a name under $SUBGATTPOOL_DATA
    #[arg(long)]
    dataset: Option<String>,
    /// Built-in 50-graph planted-clique dataset (generated from --seed)
    #[arg(long)]
    synthetic_clique: bool,
    /// Degree one-hot width cap for datasets without node features
    #[arg(long, default_value_t = 136)]
    degree_cap: usize,
}

#[derive(Args)]
struct NetArgs {
    /// Maximum nodes per rooted path
    #[arg(long = "T", default_value_t = 3)]
    t: usize,
    /// Paths sampled per node each epoch
    #[arg(long = "L", default_value_t = 12)]
    l: usize,
    /// Embedding width
    #[arg(long = "K", default_value_t = 128)]
    k: usize,
    /// Pooling ratio in (0, 1)
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Number of levels in the hierarchy
    #[arg(long = "R", default_value_t = 3)]
    r: usize,
    /// Attention heads per layer
    #[arg(long, default_value_t = 1)]
    heads: usize,
    /// Stacked attention layers at level 1
    #[arg(long, default_value_t = 1)]
    subgatt_layers: usize,
    /// Dropout rate on the graph representation during training
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    /// Arithmetic precision: double or single
    #[arg(long, default_value = "double")]
    precision: String,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 50)]
    patience: usize,
    /// Training fraction held out for early stopping (0 disables)
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
}

#[derive(Args)]
struct SampleArgs {
    /// Sample paths with this seed instead of exhaustive enumeration
    #[arg(long)]
    sampled: Option<u64>,
    /// Per-node candidate cap for exhaustive enumeration
    #[arg(long, default_value_t = 100_000)]
    cap: usize,
}

impl SampleArgs {
    fn spec(&self) -> SampleSpec {
        match self.sampled {
            Some(seed) => SampleSpec::Sampled { seed },
            None => SampleSpec::Exhaustive { cap: self.cap },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cross-validation folds; 1 trains once on the full dataset
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Threads for fold-level parallelism (0 = all cores)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Do not train the exported full-data checkpoint
    #[arg(long)]
    skip_checkpoint: bool,
    /// Output directory (default runs/<timestamp>-train)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Trained model to embed with
    #[arg(long)]
    checkpoint: PathBuf,
    /// Cluster count (default: the dataset's class count)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Graph index within the dataset
    #[arg(long)]
    graph: usize,
    /// Node whose path attention to report
    #[arg(long)]
    node: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated values for the T axis
    #[arg(long)]
    sweep_t: Option<String>,
    /// Comma-separated values for the L axis
    #[arg(long)]
    sweep_l: Option<String>,
    /// Comma-separated values for the K axis
    #[arg(long)]
    sweep_k: Option<String>,
    /// Comma-separated values for the subgatt-layers axis
    #[arg(long)]
    sweep_subgatt_layers: Option<String>,
    /// Cross-validation runs per grid point
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest of the run to reproduce
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory (default runs/<timestamp>-replay)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn exit_code(err: &EngineError) -> i32 {
    match err {
        EngineError::Config { .. } | EngineError::Contract { .. } | EngineError::Resource { .. } => {
            2
        }
        EngineError::Ingestion { .. }
        | EngineError::Parse { .. }
        | EngineError::Split { .. }
        | EngineError::Checkpoint { .. }
        | EngineError::Io(_)
        | EngineError::Json(_) => 3,
        EngineError::Dimension { .. }
        | EngineError::NonFinite { .. }
        | EngineError::Numerical { .. } => 4,
    }
}

fn resolve_dataset(data: &DataArgs, seed: u64) -> Result<DatasetSpec> {
    if data.synthetic_clique {
        return Ok(DatasetSpec::SyntheticClique {
            seed,
            degree_cap: data.degree_cap,
        });
    }
    let name = data.dataset.as_ref().expect("clap group guarantees one");
    let direct = PathBuf::from(name);
    let dir = if direct.is_dir() {
        direct
    } else {
        match std::env::var_os("SUBGATTPOOL_DATA") {
            Some(root) if Path::new(&root).join(name).is_dir() => Path::new(&root).join(name),
            _ => {
                return Err(EngineError::config(format!(
                    "dataset directory not found: {name} (also tried $SUBGATTPOOL_DATA)"
                )))
            }
        }
    };
    let dir = dir.canonicalize().unwrap_or(dir);
    Ok(DatasetSpec::Tu {
        dir: dir.to_string_lossy().into_owned(),
        degree_cap: data.degree_cap,
    })
}

fn build_network(dataset: &GraphDataset, net: &NetArgs) -> Result<NetworkConfig> {
    let mut config = NetworkConfig::new(dataset.feature_dim, dataset.num_classes, dataset.max_nodes());
    config.path_len = net.t;
    config.paths_per_node = net.l;
    config.hidden_dim = net.k;
    config.gamma = net.gamma;
    config.levels = net.r;
    config.heads = net.heads;
    config.subgatt_layers = net.subgatt_layers;
    config.dropout = net.dropout;
    config.precision = match net.precision.as_str() {
        "double" => Precision::Double,
        "single" => Precision::Single,
        other => {
            return Err(EngineError::config(format!(
                "precision must be double or single, got {other}"
            )))
        }
    };
    config.validate()?;
    Ok(config)
}

fn build_train(opt: &OptArgs, seed: u64) -> Result<TrainConfig> {
    let config = TrainConfig {
        epochs: opt.epochs,
        batch_size: opt.batch_size,
        learning_rate: opt.lr,
        patience: opt.patience,
        val_fraction: opt.val_fraction,
        seed,
    };
    config.validate()?;
    Ok(config)
}

/// Pick a fresh output directory under runs/ unless one was given.
fn choose_output_dir(explicit: &Option<PathBuf>, command: &str) -> String {
    if let Some(dir) = explicit {
        return dir.to_string_lossy().into_owned();
    }
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let base = format!("runs/{stamp}-{command}");
    let mut candidate = base.clone();
    let mut suffix = 1;
    while Path::new(&candidate).exists() {
        suffix += 1;
        candidate = format!("{base}-{suffix}");
    }
    candidate
}

fn new_manifest(
    command: &str,
    seed: u64,
    mut inputs: Vec<String>,
    out_dir: &Option<PathBuf>,
    config: CommandConfig,
) -> RunManifest {
    inputs.sort();
    RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        inputs,
        output_dir: choose_output_dir(out_dir, command),
        config,
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let dataset_spec = resolve_dataset(&args.data, args.seed)?;
    let dataset = dataset_spec.load()?;
    let network = build_network(&dataset, &args.net)?;
    let train = build_train(&args.opt, args.seed)?;
    if args.folds == 0 {
        return Err(EngineError::config("folds must be at least 1"));
    }
    let manifest = new_manifest(
        "train",
        args.seed,
        dataset_spec.input_paths(),
        &args.out_dir,
        CommandConfig::Train(TrainSpec {
            dataset: dataset_spec,
            folds: args.folds,
            jobs: args.jobs,
            skip_checkpoint: args.skip_checkpoint,
            network,
            train,
        }),
    );
    run::execute(&manifest)
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let dataset_spec = resolve_dataset(&args.data, args.seed)?;
    let dataset = dataset_spec.load()?;
    let clusters = args.k.unwrap_or(dataset.num_classes);
    let mut inputs = dataset_spec.input_paths();
    inputs.push(args.checkpoint.to_string_lossy().into_owned());
    let manifest = new_manifest(
        "cluster",
        args.seed,
        inputs,
        &args.out_dir,
        CommandConfig::Cluster(ClusterSpec {
            dataset: dataset_spec,
            checkpoint: args.checkpoint.to_string_lossy().into_owned(),
            clusters,
            restarts: args.restarts,
            seed: args.seed,
            sample: args.sample.spec(),
        }),
    );
    run::execute(&manifest)
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let dataset_spec = resolve_dataset(&args.data, args.seed)?;
    let mut inputs = dataset_spec.input_paths();
    inputs.push(args.checkpoint.to_string_lossy().into_owned());
    let manifest = new_manifest(
        "inspect",
        args.seed,
        inputs,
        &args.out_dir,
        CommandConfig::Inspect(InspectSpec {
            dataset: dataset_spec,
            checkpoint: args.checkpoint.to_string_lossy().into_owned(),
            graph: args.graph,
            node: args.node,
            sample: args.sample.spec(),
        }),
    );
    run::execute(&manifest)
}

fn parse_values(text: &str) -> Result<Vec<usize>> {
    let values: Vec<usize> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| EngineError::config(format!("bad sweep value {s:?}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(EngineError::config("sweep grid is empty"));
    }
    Ok(values)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let axes: Vec<(&str, &Option<String>)> = vec![
        ("T", &args.sweep_t),
        ("L", &args.sweep_l),
        ("K", &args.sweep_k),
        ("subgatt-layers", &args.sweep_subgatt_layers),
    ];
    let given: Vec<(&str, &String)> = axes
        .iter()
        .filter_map(|(name, v)| v.as_ref().map(|text| (*name, text)))
        .collect();
    let (axis, text) = match given.as_slice() {
        [one] => *one,
        [] => return Err(EngineError::config("no sweep axis given")),
        _ => {
            return Err(EngineError::config(format!(
                "sweep one axis at a time, got {}",
                given.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            )))
        }
    };
    let values = parse_values(text)?;
    let dataset_spec = resolve_dataset(&args.data, args.seed)?;
    let dataset = dataset_spec.load()?;
    let network = build_network(&dataset, &args.net)?;
    let train = build_train(&args.opt, args.seed)?;
    let manifest = new_manifest(
        "sweep",
        args.seed,
        dataset_spec.input_paths(),
        &args.out_dir,
        CommandConfig::Sweep(SweepSpec {
            dataset: dataset_spec,
            axis: axis.to_string(),
            values,
            repeats: args.repeats,
            folds: args.folds,
            jobs: args.jobs,
            network,
            train,
        }),
    );
    run::execute(&manifest)
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let stored = read_manifest(&args.manifest)?;
    let manifest = RunManifest {
        output_dir: choose_output_dir(&args.out_dir, &format!("replay-{}", stored.command)),
        ..stored
    };
    run::execute(&manifest)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
