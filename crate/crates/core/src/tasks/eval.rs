use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{seeds, sample_negative_edges, EdgeBatch, LabelTarget, LossPoint, Task, TaskConfig, TrainedModel};
use crate::autodiff::Tensor;
use crate::embed::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::{EntityType, GraphSplit, KnowledgeGraph, Part};
use crate::layers::{GnnModel, GraphContext};
use crate::metrics::{average_precision, macro_ap_auc, roc_auc, ScoredLabels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeReport {
    pub scope: String,
    pub n: usize,
    pub loss: Option<f64>,
    /// `None` when the scope lacks positives or negatives.
    pub ap: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub scopes: Vec<ScopeReport>,
}

impl EvalReport {
    pub fn get(&self, scope: &str) -> Option<&ScopeReport> {
        self.scopes.iter().find(|s| s.scope == scope)
    }

    pub fn to_tsv(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| v.to_string());
        let mut out = String::from("scope\tn\tloss\tap\tauc\n");
        for s in &self.scopes {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", s.scope, s.n, fmt(s.loss), fmt(s.ap), fmt(s.auc));
        }
        out
    }
}

/// `epoch,train_loss,dev_loss`, one row per epoch.
pub fn loss_curve_csv(curve: &[LossPoint]) -> String {
    let mut out = String::from("epoch,train_loss,dev_loss\n");
    for p in curve {
        let _ = writeln!(out, "{},{},{}", p.epoch, p.train_loss, p.dev_loss);
    }
    out
}

pub(crate) fn class_names(graph: &KnowledgeGraph, target: LabelTarget) -> Vec<String> {
    match target {
        LabelTarget::EntityTypeBinary => vec![
            EntityType::Utterance.as_str().to_string(),
            EntityType::NamedEntity.as_str().to_string(),
        ],
        LabelTarget::NeTypeMulticlass => graph.ne_type_vocabulary().to_vec(),
    }
}

/// Class index per node, `None` for nodes the target does not score.
pub(crate) fn node_labels(graph: &KnowledgeGraph, target: LabelTarget, classes: &[String]) -> Vec<Option<usize>> {
    graph
        .nodes()
        .iter()
        .map(|node| match target {
            LabelTarget::EntityTypeBinary => Some(usize::from(node.entity_type == EntityType::NamedEntity)),
            LabelTarget::NeTypeMulticlass => {
                node.ne_type.as_ref().and_then(|t| classes.iter().position(|c| c == t))
            }
        })
        .collect()
}

/// Mean cross-entropy of `logits` rows at `nodes`.
pub(crate) fn cross_entropy(logits: &Tensor, nodes: &[usize], labels: &[Option<usize>]) -> f64 {
    let total: f64 = nodes
        .iter()
        .map(|&u| {
            let row = logits.row(u);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[labels[u].expect("labelled node")]
        })
        .sum();
    total / nodes.len().max(1) as f64
}

pub(crate) fn bce(scores: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| s.max(0.0) - s * y + (-s.abs()).exp().ln_1p())
        .sum();
    total / labels.len().max(1) as f64
}

/// Logits `⟨z_u, z_v⟩` for each pair.
pub fn inner_product_scores(embedding: &Tensor, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(u, v)| {
            if u >= embedding.rows() || v >= embedding.rows() {
                return Err(Error::Lookup(format!("node pair ({u}, {v}) outside {} nodes", embedding.rows())));
            }
            Ok(embedding.row(u).iter().zip(embedding.row(v)).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Decoder logits of a link model with message passing over `ctx`.
pub fn score_edges(
    model: &GnnModel,
    features: &FeatureMatrix,
    ctx: &GraphContext,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let (embedding, _) = model.infer(ctx, features.as_tensor())?;
    inner_product_scores(&embedding, pairs)
}

/// Edges that carry messages in the link task: the train part of the edge
/// split, in graph order.
pub fn message_passing_edges(graph: &KnowledgeGraph, split: &GraphSplit) -> Result<Vec<(usize, usize)>> {
    require_edge_split(split)?;
    Ok(split.edges_in(Part::Train).into_iter().map(|i| graph.edges()[i]).collect())
}

pub(crate) fn train_context(graph: &KnowledgeGraph, split: &GraphSplit) -> Result<GraphContext> {
    GraphContext::new(graph.n_nodes(), &message_passing_edges(graph, split)?)
}

fn require_edge_split(split: &GraphSplit) -> Result<()> {
    if split.edge_assignment.is_none() {
        return Err(Error::Config("link prediction needs an edge split".into()));
    }
    Ok(())
}

/// Balanced dev and test batches: held-out positives in canonical order and
/// as many seeded bipartite negatives.
pub(crate) fn eval_batches(graph: &KnowledgeGraph, split: &GraphSplit, config: &TaskConfig) -> Result<[EdgeBatch; 2]> {
    require_edge_split(split)?;
    let assign = split.edge_assignment.as_deref().expect("checked");
    let positives_of = |part| -> Vec<(usize, usize)> {
        graph
            .canonical_edge_order()
            .into_iter()
            .filter(|&i| assign[i] == part)
            .map(|i| graph.edges()[i])
            .collect()
    };
    let dev = positives_of(Part::Dev);
    let test = positives_of(Part::Test);
    let mut negatives = sample_negative_edges(
        graph,
        dev.len() + test.len(),
        config.seed.wrapping_add(seeds::EVAL_NEGATIVES),
        config.negatives,
    )?;
    let test_neg = negatives.split_off(dev.len());
    Ok([
        EdgeBatch {
            positives: dev,
            negatives,
        },
        EdgeBatch {
            positives: test,
            negatives: test_neg,
        },
    ])
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

fn binary_metrics(scores: Vec<f64>, labels: Vec<bool>) -> (Option<f64>, Option<f64>) {
    match ScoredLabels::new(scores, labels) {
        Ok(sl) => (average_precision(&sl).ok(), roc_auc(&sl).ok()),
        Err(_) => (None, None),
    }
}

fn evaluate_nodes(
    model: &GnnModel,
    config: &TaskConfig,
    classes: &[String],
    graph: &KnowledgeGraph,
    features: &FeatureMatrix,
    split: &GraphSplit,
) -> Result<EvalReport> {
    let assign = split
        .node_assignment
        .as_deref()
        .ok_or_else(|| Error::Config("node classification needs a node split".into()))?;
    let ctx = GraphContext::from_graph(graph)?;
    let (_, logits) = model.infer(&ctx, features.as_tensor())?;
    let logits = logits.ok_or_else(|| Error::Config("model has no classifier head".into()))?;
    if logits.cols() != classes.len() {
        return Err(Error::Config(format!(
            "classifier has {} outputs for {} classes",
            logits.cols(),
            classes.len()
        )));
    }
    let labels = node_labels(graph, config.label_target, classes);
    // canonical order, then a seeded shuffle: ties are broken the same way
    // whatever the node ids are
    let canonical = graph.canonical_node_order();
    let order: Vec<usize> = shuffled_indices(canonical.len(), config.seed.wrapping_add(seeds::EVAL_SHUFFLE))
        .into_iter()
        .map(|i| canonical[i])
        .filter(|&u| labels[u].is_some())
        .collect();

    let mut scopes = Vec::new();
    for scope in ["train", "dev", "test", "all"] {
        let nodes: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&u| scope == "all" || assign[u].as_str() == scope)
            .collect();
        let (ap, auc) = if classes.len() == 2 {
            binary_metrics(
                nodes.iter().map(|&u| logits.get(u, 1) - logits.get(u, 0)).collect(),
                nodes.iter().map(|&u| labels[u] == Some(1)).collect(),
            )
        } else {
            let probs: Vec<Vec<f64>> = nodes
                .iter()
                .map(|&u| {
                    let row = logits.row(u);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
                    let z: f64 = e.iter().sum();
                    e.into_iter().map(|v| v / z).collect()
                })
                .collect();
            let y: Vec<usize> = nodes.iter().map(|&u| labels[u].expect("filtered")).collect();
            macro_ap_auc(&probs, &y).map_or((None, None), |(ap, auc)| (Some(ap), Some(auc)))
        };
        scopes.push(ScopeReport {
            scope: scope.to_string(),
            n: nodes.len(),
            loss: (!nodes.is_empty()).then(|| cross_entropy(&logits, &nodes, &labels)),
            ap,
            auc,
        });
    }
    Ok(EvalReport {
        task: Task::NodeClassification,
        scopes,
    })
}

fn evaluate_links(
    model: &GnnModel,
    config: &TaskConfig,
    graph: &KnowledgeGraph,
    features: &FeatureMatrix,
    split: &GraphSplit,
) -> Result<EvalReport> {
    let ctx = train_context(graph, split)?;
    let (embedding, _) = model.infer(&ctx, features.as_tensor())?;
    let batches = eval_batches(graph, split, config)?;
    let mut scopes = Vec::new();
    for (scope, batch) in ["dev", "test"].into_iter().zip(&batches) {
        let scores = inner_product_scores(&embedding, &batch.pairs())?;
        let labels = batch.labels();
        let order = shuffled_indices(batch.len(), config.seed.wrapping_add(seeds::EVAL_SHUFFLE));
        let (ap, auc) = binary_metrics(
            order.iter().map(|&i| scores[i]).collect(),
            order.iter().map(|&i| labels[i] == 1.0).collect(),
        );
        scopes.push(ScopeReport {
            scope: scope.to_string(),
            n: batch.len(),
            loss: (!batch.is_empty()).then(|| bce(&scores, &labels)),
            ap,
            auc,
        });
    }
    Ok(EvalReport {
        task: Task::LinkPrediction,
        scopes,
    })
}

/// Evaluation-mode metrics of `model` on `graph` under `split`.
pub fn evaluate(
    model: &GnnModel,
    config: &TaskConfig,
    classes: &[String],
    graph: &KnowledgeGraph,
    features: &FeatureMatrix,
    split: &GraphSplit,
) -> Result<EvalReport> {
    if features.n_nodes() != graph.n_nodes() {
        return Err(Error::Config(format!(
            "{} feature rows for {} nodes",
            features.n_nodes(),
            graph.n_nodes()
        )));
    }
    if features.dim() != model.in_dim() {
        return Err(Error::Config(format!(
            "features have dimension {}, model expects {}",
            features.dim(),
            model.in_dim()
        )));
    }
    match config.task {
        Task::NodeClassification => evaluate_nodes(model, config, classes, graph, features, split),
        Task::LinkPrediction => evaluate_links(model, config, graph, features, split),
    }
}

/// Zero-shot application of a trained model to another graph. The graph is
/// split exactly as the training graph was, so applying a model to its own
/// training graph reproduces its training-time report.
pub fn transductive_infer(
    trained: &TrainedModel,
    graph: &KnowledgeGraph,
    features: &FeatureMatrix,
) -> Result<EvalReport> {
    let split = trained.config.split_for(graph)?;
    evaluate(&trained.model, &trained.config, &trained.class_names, graph, features, &split)
}
