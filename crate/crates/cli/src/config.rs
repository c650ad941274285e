//! Run settings. Every field can come from a TOML file or a flag; flags win,
//! then the file, then the per-model defaults of [`TaskConfig::new`].

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use speechkg::embed::MissingPolicy;
use speechkg::graph::SplitRatios;
use speechkg::layers::{Head, LayerKind, ModelSpec};
use speechkg::tasks::{NegativeConstraint, Task, TaskConfig};

use crate::features::FeatureSpec;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// sage, gcn, gat or supergat.
    #[arg(long)]
    pub model: Option<String>,
    /// node-classification or link-prediction.
    #[arg(long)]
    pub task: Option<String>,
    /// "inductive" (the only setting `train` runs; see `transfer`).
    #[arg(long)]
    pub setting: Option<String>,
    /// random:<dim>[:<seed>] or file:<path>.
    #[arg(long)]
    pub features: Option<String>,
    /// Dimension of the random-feature baseline in `grid` (default 64).
    #[arg(long)]
    pub random_dim: Option<usize>,
    /// What to do with nodes an embedding file does not cover: error or zero-fill.
    #[arg(long)]
    pub missing: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub negative_ratio: Option<f64>,
    #[arg(long)]
    pub lambda_att: Option<f64>,
    /// entity_type_binary or ne_type_multiclass.
    #[arg(long)]
    pub label_target: Option<String>,
    /// bipartite or any.
    #[arg(long)]
    pub negatives: Option<String>,
    /// train:dev:test, e.g. 0.6:0.2:0.2.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    /// `self` filled in from `file`, where given.
    pub fn resolve(self, file: Option<&Path>) -> CliResult<Settings> {
        let base = match file {
            Some(path) => Settings::from_toml_file(path)?,
            None => Settings::default(),
        };
        Ok(base.overridden_by(self))
    }

    pub fn from_toml_file(path: &Path) -> CliResult<Settings> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn overridden_by(self, top: Settings) -> Settings {
        overlay!(
            self, top, model, task, setting, features, random_dim, missing, seed, epochs, lr, weight_decay, dropout,
            negative_ratio, lambda_att, label_target, negatives, split, hidden_dim, layers, heads
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn task(&self) -> CliResult<Task> {
        Ok(self.task.as_deref().unwrap_or("node-classification").parse()?)
    }

    pub fn model(&self) -> CliResult<LayerKind> {
        match &self.model {
            Some(m) => Ok(m.parse()?),
            None => Err(CliError::Input(
                "no model given; valid kinds: sage, gcn, gat, supergat".into(),
            )),
        }
    }

    pub fn features(&self) -> CliResult<FeatureSpec> {
        self.features.as_deref().unwrap_or("random:64").parse()
    }

    pub fn missing(&self) -> CliResult<MissingPolicy> {
        match self.missing.as_deref().map(|s| s.replace('-', "_")).as_deref() {
            None | Some("error") => Ok(MissingPolicy::Error),
            Some("zero_fill") => Ok(MissingPolicy::ZeroFill),
            Some(other) => Err(CliError::Input(format!(
                "unknown missing-embedding policy {other:?}; valid: error, zero-fill"
            ))),
        }
    }

    pub fn check_setting(&self) -> CliResult<()> {
        match self.setting.as_deref() {
            None | Some("inductive") => Ok(()),
            Some("transductive") => Err(CliError::Input(
                "the transductive setting applies a trained checkpoint to another graph; use `speechkg transfer`"
                    .into(),
            )),
            Some(other) => Err(CliError::Input(format!(
                "unknown setting {other:?}; valid settings: inductive, transductive"
            ))),
        }
    }

    /// Defaults for `kind`, then every field given here.
    pub fn task_config(&self, task: Task, kind: LayerKind) -> CliResult<TaskConfig> {
        let mut c = TaskConfig::new(task, kind);
        c.seed = self.seed();
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.weight_decay {
            c.weight_decay = v;
        }
        if let Some(v) = self.dropout {
            c.dropout = v;
        }
        if let Some(v) = self.negative_ratio {
            c.negative_ratio = v;
        }
        if let Some(v) = self.lambda_att {
            c.lambda_att = v;
        }
        if let Some(v) = &self.label_target {
            c.label_target = v.parse()?;
        }
        if let Some(v) = &self.negatives {
            c.negatives = match v.as_str() {
                "bipartite" => NegativeConstraint::BipartiteOnly,
                "any" => NegativeConstraint::AnyPair,
                _ => return Err(CliError::Input(format!("unknown negatives {v:?}; valid: bipartite, any"))),
            };
        }
        if let Some(v) = &self.split {
            c.ratios = parse_ratios(v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// The training functions fill in the input width and the head.
    pub fn model_spec(&self, kind: LayerKind) -> CliResult<ModelSpec> {
        let mut spec = ModelSpec::new(kind, 1, Head::LinkDecoder);
        if let Some(v) = self.hidden_dim {
            spec.hidden_dim = v;
        }
        if let Some(v) = self.layers {
            spec.n_layers = v;
        }
        if let Some(v) = self.heads {
            spec.heads = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_ratios(s: &str) -> CliResult<SplitRatios> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Input(format!("split {s:?} is not train:dev:test")))?;
    match parts[..] {
        [train, dev, test] => Ok(SplitRatios::new(train, dev, test)?),
        _ => Err(CliError::Input(format!("split {s:?} is not train:dev:test"))),
    }
}
