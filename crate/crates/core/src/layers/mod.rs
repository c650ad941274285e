//! SAGE, GCN, GAT and SuperGAT message-passing layers on top of
//! [`crate::autodiff`], plus the model that stacks them.

mod attention;
mod checkpoint;
mod context;
mod model;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Parameter, Tape, Tensor, Var};
use crate::error::{Error, Result};

pub use attention::{
    attention_targets, gat_forward, supergat_attention_loss, supergat_forward, AttentionMap,
};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
pub use context::{normalize_adjacency, ClosedNeighbourhoods, GraphContext};
pub use model::{ForwardOptions, ForwardOutput, GnnModel, Head, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Sage,
    Gcn,
    Gat,
    SuperGat,
}

impl LayerKind {
    pub const ALL: [LayerKind; 4] = [LayerKind::Sage, LayerKind::Gcn, LayerKind::Gat, LayerKind::SuperGat];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Sage => "SAGE",
            LayerKind::Gcn => "GCN",
            LayerKind::Gat => "GAT",
            LayerKind::SuperGat => "SuperGAT",
        }
    }

    pub fn is_attention(self) -> bool {
        matches!(self, LayerKind::Gat | LayerKind::SuperGat)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sage" => Ok(LayerKind::Sage),
            "gcn" => Ok(LayerKind::Gcn),
            "gat" => Ok(LayerKind::Gat),
            "supergat" => Ok(LayerKind::SuperGat),
            _ => Err(Error::Config(format!(
                "unknown model kind {s:?}; valid kinds: sage, gcn, gat, supergat"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Elu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
            Activation::Elu => tape.elu(x, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    #[serde(default = "default_aggregator")]
    pub aggregator: Aggregator,
    #[serde(default = "default_heads")]
    pub attention_heads: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "default_self_loops")]
    pub self_loops: bool,
    /// Width of SuperGAT edge features; 0 means none.
    #[serde(default)]
    pub edge_dim: usize,
    pub activation: Activation,
}

fn default_aggregator() -> Aggregator {
    Aggregator::Mean
}
fn default_heads() -> usize {
    1
}
fn default_slope() -> f64 {
    0.2
}
fn default_self_loops() -> bool {
    true
}

impl LayerConfig {
    pub fn new(kind: LayerKind, in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind,
            in_dim,
            out_dim,
            aggregator: Aggregator::Mean,
            attention_heads: 1,
            leaky_slope: 0.2,
            self_loops: true,
            edge_dim: 0,
            activation: if kind.is_attention() {
                Activation::Elu
            } else {
                Activation::Relu
            },
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.attention_heads = heads;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config(format!("{} layer dims must be ≥ 1", self.kind)));
        }
        if self.kind.is_attention() {
            if self.attention_heads == 0 {
                return Err(Error::Config("attention heads must be ≥ 1".into()));
            }
            if !self.self_loops {
                return Err(Error::Config(format!("{} always uses self-loops", self.kind)));
            }
        }
        if self.edge_dim > 0 && self.kind != LayerKind::SuperGat {
            return Err(Error::Config("edge features are only used by SuperGAT".into()));
        }
        Ok(())
    }

    /// Freshly initialised parameters, named under `prefix`.
    pub fn init_params<R: Rng + ?Sized>(&self, prefix: &str, rng: &mut R) -> Vec<Parameter> {
        let (i, o) = (self.in_dim, self.out_dim);
        match self.kind {
            LayerKind::Sage | LayerKind::Gcn => {
                vec![Parameter::new(format!("{prefix}.weight"), Tensor::glorot(i, o, rng))]
            }
            LayerKind::Gat | LayerKind::SuperGat => {
                let mut out = Vec::new();
                for h in 0..self.attention_heads {
                    out.push(Parameter::new(format!("{prefix}.head{h}.weight"), Tensor::glorot(i, o, rng)));
                    if self.edge_dim > 0 {
                        out.push(Parameter::new(
                            format!("{prefix}.head{h}.edge_weight"),
                            Tensor::glorot(self.edge_dim, o, rng),
                        ));
                    }
                    let limit = (6.0 / (2 * o + 1) as f64).sqrt();
                    out.push(Parameter::new(format!("{prefix}.head{h}.att"), Tensor::uniform(2 * o, 1, limit, rng)));
                }
                out
            }
        }
    }

    pub fn params_per_head(&self) -> usize {
        if self.edge_dim > 0 {
            3
        } else {
            2
        }
    }
}

fn check_input(tape: &Tape, cfg: &LayerConfig, ctx: &GraphContext, h: Var) -> Result<()> {
    let (rows, cols) = tape.value(h).shape();
    if rows != ctx.n() || cols != cfg.in_dim {
        return Err(Error::Shape(format!(
            "{} layer expects {}x{} input, got {rows}x{cols}",
            cfg.kind,
            ctx.n(),
            cfg.in_dim
        )));
    }
    Ok(())
}

/// Mean over the closed neighbourhood, then the weight, then the activation.
pub fn sage_forward(tape: &mut Tape, cfg: &LayerConfig, params: &[Var], ctx: &GraphContext, h: Var) -> Result<Var> {
    check_input(tape, cfg, ctx, h)?;
    let agg = tape.spmm(&ctx.mean_adjacency(cfg.self_loops), h)?;
    let z = tape.matmul(agg, params[0])?;
    Ok(cfg.activation.apply(tape, z))
}

/// Normalised adjacency product, then the weight, then the activation.
pub fn gcn_forward(tape: &mut Tape, cfg: &LayerConfig, params: &[Var], ctx: &GraphContext, h: Var) -> Result<Var> {
    check_input(tape, cfg, ctx, h)?;
    let agg = tape.spmm(&ctx.gcn_adjacency(cfg.self_loops), h)?;
    let z = tape.matmul(agg, params[0])?;
    Ok(cfg.activation.apply(tape, z))
}
