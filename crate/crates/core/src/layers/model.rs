use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gat_forward, gcn_forward, sage_forward, supergat_forward, Activation, AttentionMap, GraphContext, LayerConfig, LayerKind};
use crate::autodiff::{Parameter, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Head {
    /// Linear map from the last hidden layer to class logits.
    NodeClassifier { classes: usize },
    /// Inner product of final node embeddings.
    LinkDecoder,
}

/// Architecture of a stacked GNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub heads: usize,
    pub edge_dim: usize,
    pub head: Head,
}

impl ModelSpec {
    pub fn new(kind: LayerKind, in_dim: usize, head: Head) -> Self {
        Self {
            kind,
            in_dim,
            hidden_dim: 64,
            n_layers: 2,
            heads: 1,
            edge_dim: 0,
            head,
        }
    }

    /// Every layer is activated, except the last one of a link model, whose
    /// output feeds the inner-product decoder directly.
    pub fn layer_configs(&self) -> Vec<LayerConfig> {
        (0..self.n_layers)
            .map(|i| {
                let in_dim = if i == 0 { self.in_dim } else { self.hidden_dim };
                let mut cfg = LayerConfig::new(self.kind, in_dim, self.hidden_dim).with_heads(self.heads);
                if self.kind == LayerKind::SuperGat {
                    cfg.edge_dim = self.edge_dim;
                }
                if i + 1 == self.n_layers && self.head == Head::LinkDecoder {
                    cfg.activation = Activation::Identity;
                }
                cfg
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        if let Head::NodeClassifier { classes } = self.head {
            if classes < 2 {
                return Err(Error::Config("node classifier needs at least 2 classes".into()));
            }
        }
        self.layer_configs().iter().try_for_each(LayerConfig::validate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    spec: ModelSpec,
    layers: Vec<LayerConfig>,
    params: Vec<Parameter>,
    layer_ranges: Vec<Range<usize>>,
}

#[derive(Debug)]
pub struct ForwardOutput {
    /// Output of the last message-passing layer.
    pub embedding: Var,
    /// Class logits for a node-classifier head.
    pub logits: Option<Var>,
    pub attention: Vec<AttentionMap>,
    /// Tape handles of [`GnnModel::parameters`], in order.
    pub params: Vec<Var>,
}

/// Per-call forward settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions<'a> {
    pub training: bool,
    pub dropout: f64,
    pub edge_features: Option<&'a Tensor>,
    /// Extra pairs supervised with zero attention (SuperGAT only).
    pub attention_negatives: &'a [(usize, usize)],
}

impl GnnModel {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec.layer_configs();
        let mut params = Vec::new();
        let mut layer_ranges = Vec::new();
        for (i, cfg) in layers.iter().enumerate() {
            let start = params.len();
            params.extend(cfg.init_params(&format!("layers.{i}"), &mut rng));
            layer_ranges.push(start..params.len());
        }
        if let Head::NodeClassifier { classes } = spec.head {
            params.push(Parameter::new("head.weight", Tensor::glorot(spec.hidden_dim, classes, &mut rng)));
            params.push(Parameter::new("head.bias", Tensor::zeros(1, classes)));
        }
        Ok(Self {
            spec,
            layers,
            params,
            layer_ranges,
        })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_parameters(spec: ModelSpec, params: Vec<Parameter>) -> Result<Self> {
        let fresh = Self::new(spec, 0)?;
        if fresh.params.len() != params.len() {
            return Err(Error::Config(format!(
                "model expects {} parameters, got {}",
                fresh.params.len(),
                params.len()
            )));
        }
        for (want, got) in fresh.params.iter().zip(&params) {
            if want.name != got.name || want.value.shape() != got.value.shape() {
                return Err(Error::Config(format!(
                    "parameter mismatch: expected {} {:?}, got {} {:?}",
                    want.name,
                    want.value.shape(),
                    got.name,
                    got.value.shape()
                )));
            }
        }
        Ok(Self { params, ..fresh })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerConfig] {
        &self.layers
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn in_dim(&self) -> usize {
        self.spec.in_dim
    }

    /// Zeroes the weights of the last message-passing layer, making every
    /// final embedding zero.
    pub fn zero_output_layer(&mut self) {
        let range = self.layer_ranges.last().expect("validated").clone();
        for p in &mut self.params[range] {
            if p.name.ends_with("weight") {
                p.value = Tensor::zeros(p.value.rows(), p.value.cols());
            }
        }
    }

    /// Rounds every parameter to the nearest f32, matching what a
    /// checkpoint stores.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            p.value = p.value.map(|x| f64::from(x as f32));
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        ctx: &GraphContext,
        x: Var,
        opts: ForwardOptions<'_>,
        rng: &mut R,
    ) -> Result<ForwardOutput> {
        let params: Vec<Var> = self.params.iter().map(|p| tape.param(p.value.clone())).collect();
        let mut h = tape.dropout(x, opts.dropout, opts.training, rng)?;
        let mut attention = Vec::new();
        for (i, (cfg, range)) in self.layers.iter().zip(&self.layer_ranges).enumerate() {
            let p = &params[range.clone()];
            h = match cfg.kind {
                LayerKind::Sage => sage_forward(tape, cfg, p, ctx, h)?,
                LayerKind::Gcn => gcn_forward(tape, cfg, p, ctx, h)?,
                LayerKind::Gat => gat_forward(tape, cfg, p, ctx, h)?,
                LayerKind::SuperGat => {
                    let (out, maps) =
                        supergat_forward(tape, cfg, p, ctx, h, opts.edge_features, opts.attention_negatives)?;
                    attention.extend(maps);
                    out
                }
            };
            let last = i + 1 == self.layers.len();
            if !last || matches!(self.spec.head, Head::NodeClassifier { .. }) {
                h = tape.dropout(h, opts.dropout, opts.training, rng)?;
            }
        }
        let logits = match self.spec.head {
            Head::NodeClassifier { .. } => {
                let n = params.len();
                let z = tape.matmul(h, params[n - 2])?;
                Some(tape.add_row(z, params[n - 1])?)
            }
            Head::LinkDecoder => None,
        };
        Ok(ForwardOutput {
            embedding: h,
            logits,
            attention,
            params,
        })
    }

    /// Deterministic evaluation-mode forward pass; returns final embeddings
    /// and, for a classifier, logits.
    pub fn infer(&self, ctx: &GraphContext, features: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        if features.cols() != self.spec.in_dim {
            return Err(Error::Config(format!(
                "features have dimension {}, model expects {}",
                features.cols(),
                self.spec.in_dim
            )));
        }
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let out = self.forward(&mut tape, ctx, x, ForwardOptions::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
        let logits = out.logits.map(|l| tape.value(l).clone());
        Ok((tape.value(out.embedding).clone(), logits))
    }
}

