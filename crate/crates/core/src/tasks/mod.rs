//! Node classification and link prediction: training loops, negative
//! sampling, evaluation and zero-shot transfer to another graph.
//!
//! Setting names follow the project's CLI: "inductive" means a
//! train/dev/test split inside one graph, "transductive" means applying a
//! trained model to a different graph without retraining. (Much of the GNN
//! literature uses these two words the other way round.)

mod eval;
mod sampling;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSplit, KnowledgeGraph, SplitRatios};
use crate::layers::{GnnModel, LayerKind};

pub use eval::{
    evaluate, inner_product_scores, loss_curve_csv, message_passing_edges, score_edges, transductive_infer, EvalReport, ScopeReport,
};
pub use sampling::{sample_negative_edges, NegativeConstraint};
pub use train::{train_link_predictor, train_node_classifier};

/// Fixed offsets added to the run seed, one per source of randomness.
pub mod seeds {
    pub const INIT: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const DROPOUT: u64 = 3;
    pub const TRAIN_NEGATIVES: u64 = 4;
    pub const EVAL_NEGATIVES: u64 = 5;
    pub const EVAL_SHUFFLE: u64 = 6;
    /// Random input features, when a run asks for them.
    pub const FEATURES: u64 = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClassification,
    LinkPrediction,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::NodeClassification => "node-classification",
            Task::LinkPrediction => "link-prediction",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "node-classification" | "nc" => Ok(Task::NodeClassification),
            "link-prediction" | "lp" => Ok(Task::LinkPrediction),
            _ => Err(Error::Config(format!(
                "unknown task {s:?}; valid tasks: node-classification, link-prediction"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelTarget {
    /// Utterance (0) vs named entity (1), over all nodes.
    #[default]
    EntityTypeBinary,
    /// ne_type of entity nodes; utterance nodes are not scored.
    NeTypeMulticlass,
}

impl FromStr for LabelTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "entity_type_binary" | "entity_type" => Ok(LabelTarget::EntityTypeBinary),
            "ne_type_multiclass" | "ne_type" => Ok(LabelTarget::NeTypeMulticlass),
            _ => Err(Error::Config(format!(
                "unknown label target {s:?}; valid targets: entity_type_binary, ne_type_multiclass"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: Task,
    pub label_target: LabelTarget,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Sampled negatives per training positive (link task).
    pub negative_ratio: f64,
    /// Weight of the attention loss (SuperGAT).
    pub lambda_att: f64,
    pub ratios: SplitRatios,
    pub negatives: NegativeConstraint,
}

impl TaskConfig {
    /// 250 epochs (10 for SAGE), lr 0.005, weight decay 0.05, dropout 0.2
    /// for node classification and 0.5 for link prediction.
    pub fn new(task: Task, kind: LayerKind) -> Self {
        Self {
            task,
            label_target: LabelTarget::EntityTypeBinary,
            epochs: if kind == LayerKind::Sage { 10 } else { 250 },
            lr: 0.005,
            weight_decay: 0.05,
            dropout: match task {
                Task::NodeClassification => 0.2,
                Task::LinkPrediction => 0.5,
            },
            seed: 0,
            negative_ratio: 1.0,
            lambda_att: 1e-3,
            ratios: SplitRatios::default(),
            negatives: NegativeConstraint::BipartiteOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if !(self.negative_ratio > 0.0 && self.negative_ratio.is_finite()) {
            return Err(Error::Config(format!("negative_ratio must be > 0, got {}", self.negative_ratio)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) || !(self.lambda_att >= 0.0) {
            return Err(Error::Config("lr must be > 0; weight_decay and lambda_att ≥ 0".into()));
        }
        self.ratios.validate()
    }

    /// The split this config trains on; reproducible from the graph alone.
    pub fn split_for(&self, graph: &KnowledgeGraph) -> Result<GraphSplit> {
        GraphSplit::nodes_and_edges(graph, self.ratios, self.seed.wrapping_add(seeds::SPLIT))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Parameters from the epoch with the lowest dev loss, rounded to f32.
    pub model: GnnModel,
    pub config: TaskConfig,
    /// Class names behind the classifier outputs (node classification).
    pub class_names: Vec<String>,
    pub loss_curve: Vec<LossPoint>,
    /// 1-based.
    pub best_epoch: usize,
    pub report: EvalReport,
}

#[derive(Serialize, Deserialize)]
struct TrainingMetadata {
    config: TaskConfig,
    class_names: Vec<String>,
    loss_curve: Vec<LossPoint>,
    best_epoch: usize,
    report: EvalReport,
}

impl TrainedModel {
    /// Everything except the parameters, for storing next to them.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::to_value(TrainingMetadata {
            config: self.config.clone(),
            class_names: self.class_names.clone(),
            loss_curve: self.loss_curve.clone(),
            best_epoch: self.best_epoch,
            report: self.report.clone(),
        })
        .expect("plain data serialises")
    }

    pub fn from_metadata(model: GnnModel, metadata: serde_json::Value) -> Result<Self> {
        let m: TrainingMetadata = serde_json::from_value(metadata)?;
        Ok(Self {
            model,
            config: m.config,
            class_names: m.class_names,
            loss_curve: m.loss_curve,
            best_epoch: m.best_epoch,
            report: m.report,
        })
    }
}

/// Positive and negative pairs; labels are implied (1 then 0).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeBatch {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl EdgeBatch {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.positives.iter().chain(&self.negatives).copied().collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        let mut y = vec![1.0; self.positives.len()];
        y.resize(self.len(), 0.0);
        y
    }
}
