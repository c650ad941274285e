pub mod build;
pub mod grid;
pub mod stats;
pub mod train;
pub mod transfer;

use speechkg::embed::FeatureMatrix;
use speechkg::graph::KnowledgeGraph;
use speechkg::layers::{LayerKind, ModelSpec};
use speechkg::tasks::{train_link_predictor, train_node_classifier, Task, TaskConfig, TrainedModel};

use crate::{CliResult, Settings};

/// One training run as `train` and every `grid` cell perform it.
pub(crate) fn fit(
    graph: &KnowledgeGraph,
    features: &FeatureMatrix,
    kind: LayerKind,
    settings: &Settings,
) -> CliResult<(TrainedModel, ModelSpec)> {
    let task = settings.task()?;
    let config: TaskConfig = settings.task_config(task, kind)?;
    let arch = settings.model_spec(kind)?;
    let split = config.split_for(graph)?;
    let trained = match task {
        Task::NodeClassification => train_node_classifier(graph, features, &split, &arch, &config)?,
        Task::LinkPrediction => train_link_predictor(graph, features, &split, &arch, &config)?,
    };
    Ok((trained, arch))
}
