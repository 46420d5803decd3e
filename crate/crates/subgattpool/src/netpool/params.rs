//! Model parameters: construction, flattening and checkpoints.

use super::NetworkConfig;
use crate::error::{EngineError, Result};
use crate::numcore::DenseMatrix;
use crate::rng::{stream, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct SubGattHeadParams {
    /// Projection, `out x (t * in_dim)`.
    pub w: DenseMatrix,
    /// Scoring vector, `out x 1`.
    pub a: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubGattLayerParams {
    pub heads: Vec<SubGattHeadParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GinLayerParams {
    pub eps: DenseMatrix,
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
}

/// All trainable parameters. The flattening order defined by [`Self::visit`]
/// is the single canonical order shared by initialization draws, optimizer
/// slots, tape registration, gradient checking and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub subgatt_embed: Vec<SubGattLayerParams>,
    pub subgatt_pool: SubGattLayerParams,
    pub gin_embed: Vec<GinLayerParams>,
    pub gin_pool: Vec<GinLayerParams>,
    /// Intra-level attention vector, `hidden_dim x 1`, shared across levels.
    pub theta: DenseMatrix,
    /// Inter-level attention vector, `hidden_dim x 1`.
    pub theta_tilde: DenseMatrix,
    /// `num_classes x hidden_dim`.
    pub classifier_w: DenseMatrix,
    /// `1 x num_classes`.
    pub classifier_b: DenseMatrix,
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    DenseMatrix::new(rows, cols, data).expect("glorot shape")
}

fn attention_vec(rows: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows).map(|_| rng.gen_range(-0.1..0.1)).collect();
    DenseMatrix::new(rows, 1, data).expect("attention shape")
}

impl ModelParams {
    /// Fresh parameters drawn from a single stream in flattening order:
    /// weight matrices are Glorot uniform, attention vectors uniform in
    /// (-0.1, 0.1), epsilons and biases zero.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let sizes = config.level_sizes()?;
        let (d, k, t) = (config.feature_dim, config.hidden_dim, config.path_len);
        let kh = config.head_dim();
        let mut rng = stream(seed, &[tag::INIT]);

        let subgatt_embed = (0..config.subgatt_layers)
            .map(|layer| {
                let in_dim = t * if layer == 0 { d } else { k };
                SubGattLayerParams {
                    heads: (0..config.heads)
                        .map(|_| SubGattHeadParams {
                            w: glorot(kh, in_dim, &mut rng),
                            a: attention_vec(kh, &mut rng),
                        })
                        .collect(),
                }
            })
            .collect();
        let subgatt_pool = SubGattLayerParams {
            heads: vec![SubGattHeadParams {
                w: glorot(sizes[0], t * d, &mut rng),
                a: attention_vec(sizes[0], &mut rng),
            }],
        };
        let gin_embed = (0..config.levels - 2)
            .map(|_| GinLayerParams {
                eps: DenseMatrix::zeros(1, 1),
                w1: glorot(k, k, &mut rng),
                b1: DenseMatrix::zeros(1, k),
                w2: glorot(k, k, &mut rng),
                b2: DenseMatrix::zeros(1, k),
            })
            .collect();
        let gin_pool = (0..config.levels - 2)
            .map(|r| {
                let next = sizes[r + 1];
                GinLayerParams {
                    eps: DenseMatrix::zeros(1, 1),
                    w1: glorot(k, k, &mut rng),
                    b1: DenseMatrix::zeros(1, k),
                    w2: glorot(k, next, &mut rng),
                    b2: DenseMatrix::zeros(1, next),
                }
            })
            .collect();
        Ok(ModelParams {
            subgatt_embed,
            subgatt_pool,
            gin_embed,
            gin_pool,
            theta: attention_vec(k, &mut rng),
            theta_tilde: attention_vec(k, &mut rng),
            classifier_w: glorot(config.num_classes, k, &mut rng),
            classifier_b: DenseMatrix::zeros(1, config.num_classes),
        })
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a DenseMatrix)) {
        for (l, layer) in self.subgatt_embed.iter().enumerate() {
            for (h, head) in layer.heads.iter().enumerate() {
                f(format!("subgatt_embed.{l}.{h}.w"), &head.w);
                f(format!("subgatt_embed.{l}.{h}.a"), &head.a);
            }
        }
        for (h, head) in self.subgatt_pool.heads.iter().enumerate() {
            f(format!("subgatt_pool.{h}.w"), &head.w);
            f(format!("subgatt_pool.{h}.a"), &head.a);
        }
        for (which, layers) in [("gin_embed", &self.gin_embed), ("gin_pool", &self.gin_pool)] {
            for (l, layer) in layers.iter().enumerate() {
                f(format!("{which}.{l}.eps"), &layer.eps);
                f(format!("{which}.{l}.w1"), &layer.w1);
                f(format!("{which}.{l}.b1"), &layer.b1);
                f(format!("{which}.{l}.w2"), &layer.w2);
                f(format!("{which}.{l}.b2"), &layer.b2);
            }
        }
        f("theta".to_string(), &self.theta);
        f("theta_tilde".to_string(), &self.theta_tilde);
        f("classifier.w".to_string(), &self.classifier_w);
        f("classifier.b".to_string(), &self.classifier_b);
    }

    fn visit_mut<'a>(&'a mut self, f: &mut impl FnMut(String, &'a mut DenseMatrix)) {
        for (l, layer) in self.subgatt_embed.iter_mut().enumerate() {
            for (h, head) in layer.heads.iter_mut().enumerate() {
                f(format!("subgatt_embed.{l}.{h}.w"), &mut head.w);
                f(format!("subgatt_embed.{l}.{h}.a"), &mut head.a);
            }
        }
        for (h, head) in self.subgatt_pool.heads.iter_mut().enumerate() {
            f(format!("subgatt_pool.{h}.w"), &mut head.w);
            f(format!("subgatt_pool.{h}.a"), &mut head.a);
        }
        for (which, layers) in [
            ("gin_embed", &mut self.gin_embed),
            ("gin_pool", &mut self.gin_pool),
        ] {
            for (l, layer) in layers.iter_mut().enumerate() {
                f(format!("{which}.{l}.eps"), &mut layer.eps);
                f(format!("{which}.{l}.w1"), &mut layer.w1);
                f(format!("{which}.{l}.b1"), &mut layer.b1);
                f(format!("{which}.{l}.w2"), &mut layer.w2);
                f(format!("{which}.{l}.b2"), &mut layer.b2);
            }
        }
        f("theta".to_string(), &mut self.theta);
        f("theta_tilde".to_string(), &mut self.theta_tilde);
        f("classifier.w".to_string(), &mut self.classifier_w);
        f("classifier.b".to_string(), &mut self.classifier_b);
    }

    /// Named views of every parameter in canonical order.
    pub fn flatten(&self) -> Vec<(String, &DenseMatrix)> {
        let mut out = Vec::new();
        self.visit(&mut |name, m| out.push((name, m)));
        out
    }

    pub fn flatten_mut(&mut self) -> Vec<(String, &mut DenseMatrix)> {
        let mut out = Vec::new();
        self.visit_mut(&mut |name, m| out.push((name, m)));
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.flatten().iter().map(|(_, m)| m.shape()).collect()
    }

    pub fn total_entries(&self) -> usize {
        self.flatten()
            .iter()
            .map(|(_, m)| m.rows() * m.cols())
            .sum()
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized training state: enough to resume evaluation exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: NetworkConfig,
    /// `(name, matrix)` pairs in canonical order.
    pub params: Vec<(String, DenseMatrix)>,
    pub seed: u64,
    pub epoch: usize,
}

pub fn save_checkpoint(
    path: &Path,
    config: &NetworkConfig,
    params: &ModelParams,
    seed: u64,
    epoch: usize,
) -> Result<()> {
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        params: params
            .flatten()
            .into_iter()
            .map(|(name, m)| (name, m.clone()))
            .collect(),
        seed,
        epoch,
    };
    let text = serde_json::to_string_pretty(&checkpoint)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, ModelParams)> {
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::Checkpoint {
        detail: format!("cannot read {}: {e}", path.display()),
    })?;
    let checkpoint: Checkpoint = serde_json::from_str(&text).map_err(|e| {
        EngineError::Checkpoint {
            detail: format!("{}: {e}", path.display()),
        }
    })?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(EngineError::Checkpoint {
            detail: format!(
                "version {} is not supported (expected {CHECKPOINT_VERSION})",
                checkpoint.version
            ),
        });
    }
    // Rebuild the structure from the config, then overwrite every matrix
    // from the stored pairs, so shape or name drift is caught loudly.
    let mut params = ModelParams::init(&checkpoint.config, checkpoint.seed)?;
    let mut stored: std::collections::BTreeMap<&str, &DenseMatrix> = checkpoint
        .params
        .iter()
        .map(|(n, m)| (n.as_str(), m))
        .collect();
    for (name, slot) in params.flatten_mut() {
        let found = stored.remove(name.as_str()).ok_or_else(|| {
            EngineError::Checkpoint {
                detail: format!("missing parameter {name}"),
            }
        })?;
        if found.shape() != slot.shape() {
            return Err(EngineError::Checkpoint {
                detail: format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    found.shape(),
                    slot.shape()
                ),
            });
        }
        *slot = found.clone();
    }
    if let Some((name, _)) = stored.into_iter().next() {
        return Err(EngineError::Checkpoint {
            detail: format!("unknown parameter {name}"),
        });
    }
    Ok((checkpoint, params))
}
