use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{bce, class_names, cross_entropy, eval_batches, evaluate, inner_product_scores, node_labels, train_context};
use super::{seeds, sample_negative_edges, EdgeBatch, LossPoint, Task, TaskConfig, TrainedModel};
use crate::autodiff::{adam_step, AdamState, Tape, Tensor, Var};
use crate::embed::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::{GraphSplit, KnowledgeGraph, Part};
use crate::layers::{
    attention_targets, supergat_attention_loss, ForwardOptions, ForwardOutput, GnnModel, GraphContext, Head,
    LayerKind, ModelSpec,
};

fn check_inputs(graph: &KnowledgeGraph, features: &FeatureMatrix, config: &TaskConfig, task: Task) -> Result<()> {
    config.validate()?;
    if config.task != task {
        return Err(Error::Config(format!("config is for {}, not {task}", config.task)));
    }
    if features.n_nodes() != graph.n_nodes() {
        return Err(Error::Config(format!(
            "{} feature rows for {} nodes",
            features.n_nodes(),
            graph.n_nodes()
        )));
    }
    Ok(())
}

/// `λ · Σ` attention losses over every SuperGAT layer and head.
fn attention_term(tape: &mut Tape, out: &ForwardOutput, ctx: &GraphContext, lambda: f64) -> Result<Option<Var>> {
    if out.attention.is_empty() || lambda == 0.0 {
        return Ok(None);
    }
    let mut total: Option<Var> = None;
    for map in &out.attention {
        let targets = attention_targets(map, ctx);
        let l = supergat_attention_loss(tape, map, &targets)?;
        total = Some(match total {
            None => l,
            Some(acc) => tape.add(acc, l)?,
        });
    }
    Ok(total.map(|t| tape.scale(t, lambda)))
}

/// Full-batch Adam loop. `step` builds the training loss on a fresh tape;
/// `dev_loss` scores the updated model. Keeps the parameters of the epoch
/// with the lowest dev loss and rounds them to f32.
fn fit(
    model: &mut GnnModel,
    config: &TaskConfig,
    mut step: impl FnMut(&GnnModel, &mut Tape, usize) -> Result<(Var, Vec<Var>)>,
    dev_loss: impl Fn(&GnnModel) -> Result<f64>,
) -> Result<(Vec<LossPoint>, usize)> {
    let mut adam = AdamState::new(config.lr, config.weight_decay);
    let mut curve = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, GnnModel)> = None;
    for epoch in 1..=config.epochs {
        let mut tape = Tape::new();
        let (loss, params) = step(model, &mut tape, epoch)?;
        let train_loss = tape.value(loss).item();
        if !train_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("training loss is {train_loss}"),
            });
        }
        let mut grads = tape.backward(loss);
        let grads: Vec<Tensor> = params
            .iter()
            .zip(model.parameters())
            .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.value.rows(), p.value.cols())))
            .collect();
        adam_step(model.parameters_mut(), &grads, &mut adam).map_err(|e| match e {
            Error::Training { message, .. } => Error::Training { epoch, message },
            other => other,
        })?;
        let dev = dev_loss(model)?;
        if !dev.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("dev loss is {dev}"),
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} dev {dev:.6}");
        curve.push(LossPoint {
            epoch,
            train_loss,
            dev_loss: dev,
        });
        if best.as_ref().is_none_or(|(b, _, _)| dev < *b) {
            best = Some((dev, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best_model) = best.expect("epochs ≥ 1");
    *model = best_model;
    model.round_to_f32();
    Ok((curve, best_epoch))
}

/// Per-epoch zero-attention pairs for SuperGAT: as many bipartite non-edges
/// as there are message-passing edges, fewer if the graph is too dense.
fn attention_negatives(graph: &KnowledgeGraph, config: &TaskConfig, n: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    match sample_negative_edges(graph, n, seed, config.negatives) {
        Err(Error::Sampling(_)) => Ok(Vec::new()),
        other => other,
    }
}

/// Full-batch node classification. Message passing sees the whole graph;
/// the loss covers train nodes only, and dev nodes drive model selection.
pub fn train_node_classifier(
    graph: &KnowledgeGraph,
    features: &FeatureMatrix,
    split: &GraphSplit,
    arch: &ModelSpec,
    config: &TaskConfig,
) -> Result<TrainedModel> {
    check_inputs(graph, features, config, Task::NodeClassification)?;
    let assign = split
        .node_assignment
        .as_deref()
        .ok_or_else(|| Error::Config("node classification needs a node split".into()))?;
    let classes = class_names(graph, config.label_target);
    if classes.len() < 2 {
        return Err(Error::Config(format!("label target has {} classes; need at least 2", classes.len())));
    }
    let labels = node_labels(graph, config.label_target, &classes);
    let nodes_in = |part: Part| -> Vec<usize> {
        graph
            .canonical_node_order()
            .into_iter()
            .filter(|&u| labels[u].is_some() && assign[u] == part)
            .collect()
    };
    let (train_nodes, dev_nodes) = (nodes_in(Part::Train), nodes_in(Part::Dev));
    if train_nodes.is_empty() || dev_nodes.is_empty() {
        return Err(Error::Config("train and dev splits both need labelled nodes".into()));
    }

    let spec = ModelSpec {
        in_dim: features.dim(),
        head: Head::NodeClassifier { classes: classes.len() },
        ..arch.clone()
    };
    let mut model = GnnModel::new(spec, config.seed.wrapping_add(seeds::INIT))?;
    let ctx = GraphContext::from_graph(graph)?;
    let mut onehot = Tensor::zeros(train_nodes.len(), classes.len());
    for (r, &u) in train_nodes.iter().enumerate() {
        onehot.set(r, labels[u].expect("labelled"), 1.0);
    }
    let train_idx: Arc<[usize]> = train_nodes.into();
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(seeds::DROPOUT));
    let mut neg_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(seeds::TRAIN_NEGATIVES));
    let supergat = arch.kind == LayerKind::SuperGat;

    let (loss_curve, best_epoch) = fit(
        &mut model,
        config,
        |model, tape, _| {
            let negatives = if supergat {
                attention_negatives(graph, config, ctx.edges().len(), neg_rng.random())?
            } else {
                Vec::new()
            };
            let x = tape.constant(features.as_tensor().clone());
            let opts = ForwardOptions {
                training: true,
                dropout: config.dropout,
                edge_features: None,
                attention_negatives: &negatives,
            };
            let out = model.forward(tape, &ctx, x, opts, &mut dropout_rng)?;
            let logits = tape.gather_rows(out.logits.expect("classifier head"), Arc::clone(&train_idx))?;
            let mut loss = tape.softmax_cross_entropy(logits, &onehot)?;
            if let Some(att) = attention_term(tape, &out, &ctx, config.lambda_att)? {
                loss = tape.add(loss, att)?;
            }
            Ok((loss, out.params))
        },
        |model| {
            let (_, logits) = model.infer(&ctx, features.as_tensor())?;
            Ok(cross_entropy(&logits.expect("classifier head"), &dev_nodes, &labels))
        },
    )?;
    let report = evaluate(&model, config, &classes, graph, features, split)?;
    Ok(TrainedModel {
        model,
        config: config.clone(),
        class_names: classes,
        loss_curve,
        best_epoch,
        report,
    })
}

/// Link prediction with an inner-product decoder. Only train edges carry
/// messages or act as positives; every epoch draws fresh negatives from the
/// non-edges of the full graph, so held-out edges never enter the loss.
pub fn train_link_predictor(
    graph: &KnowledgeGraph,
    features: &FeatureMatrix,
    split: &GraphSplit,
    arch: &ModelSpec,
    config: &TaskConfig,
) -> Result<TrainedModel> {
    check_inputs(graph, features, config, Task::LinkPrediction)?;
    let ctx = train_context(graph, split)?;
    let positives: Vec<(usize, usize)> = {
        let assign = split.edge_assignment.as_deref().expect("train_context checked");
        graph
            .canonical_edge_order()
            .into_iter()
            .filter(|&i| assign[i] == Part::Train)
            .map(|i| graph.edges()[i])
            .collect()
    };
    let [dev_batch, _] = eval_batches(graph, split, config)?;
    if positives.is_empty() || dev_batch.positives.is_empty() {
        return Err(Error::Config("train and dev splits both need edges".into()));
    }
    let n_neg = ((config.negative_ratio * positives.len() as f64).round() as usize).max(1);

    let spec = ModelSpec {
        in_dim: features.dim(),
        head: Head::LinkDecoder,
        ..arch.clone()
    };
    let mut model = GnnModel::new(spec, config.seed.wrapping_add(seeds::INIT))?;
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(seeds::DROPOUT));
    let mut neg_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(seeds::TRAIN_NEGATIVES));
    let dev_pairs = dev_batch.pairs();
    let dev_labels = dev_batch.labels();

    let (loss_curve, best_epoch) = fit(
        &mut model,
        config,
        |model, tape, _| {
            let batch = EdgeBatch {
                positives: positives.clone(),
                negatives: sample_negative_edges(graph, n_neg, neg_rng.random(), config.negatives)?,
            };
            let x = tape.constant(features.as_tensor().clone());
            let opts = ForwardOptions {
                training: true,
                dropout: config.dropout,
                edge_features: None,
                attention_negatives: &batch.negatives,
            };
            let out = model.forward(tape, &ctx, x, opts, &mut dropout_rng)?;
            let (us, vs): (Vec<usize>, Vec<usize>) = batch.pairs().into_iter().unzip();
            let zu = tape.gather_rows(out.embedding, us)?;
            let zv = tape.gather_rows(out.embedding, vs)?;
            let scores = tape.row_dot(zu, zv)?;
            let mut loss = tape.bce_with_logits(scores, &batch.labels())?;
            if let Some(att) = attention_term(tape, &out, &ctx, config.lambda_att)? {
                loss = tape.add(loss, att)?;
            }
            Ok((loss, out.params))
        },
        |model| {
            let (embedding, _) = model.infer(&ctx, features.as_tensor())?;
            Ok(bce(&inner_product_scores(&embedding, &dev_pairs)?, &dev_labels))
        },
    )?;
    let report = evaluate(&model, config, &[], graph, features, split)?;
    Ok(TrainedModel {
        model,
        config: config.clone(),
        class_names: Vec::new(),
        loss_curve,
        best_epoch,
        report,
    })
}
