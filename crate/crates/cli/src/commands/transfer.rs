use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use speechkg::layers::read_checkpoint;
use speechkg::tasks::{transductive_infer, TrainedModel};

use crate::{read_graph, sidecar, write_atomic, CliResult, FeatureSpec, RunManifest, Settings, WithContext};

#[derive(Debug, Clone, Args)]
pub struct TransferArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Target graph JSON.
    #[arg(long)]
    pub graph: PathBuf,
    /// random:<dim>[:<seed>] or file:<path>; must match the checkpoint's input width.
    #[arg(long)]
    pub features: String,
    /// Evaluation TSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// error (default) or zero-fill for target nodes missing from the embedding file.
    #[arg(long)]
    pub missing: Option<String>,
}

/// Zero-shot evaluation of a trained model on another graph, split the same
/// way the training graph was.
pub fn cmd_transfer(args: &TransferArgs) -> CliResult<()> {
    let started = Instant::now();
    let spec: FeatureSpec = args.features.parse()?;
    let missing = Settings {
        missing: args.missing.clone(),
        ..Settings::default()
    }
    .missing()?;
    let ckpt = read_checkpoint(&args.checkpoint).context(|| args.checkpoint.display().to_string())?;
    let seed = ckpt.header.seed;
    let trained = TrainedModel::from_metadata(ckpt.model, ckpt.header.metadata)
        .context(|| format!("{}: training metadata", args.checkpoint.display()))?;

    let graph = read_graph(&args.graph)?;
    let features = spec.load(&graph, seed, missing)?;
    let report = transductive_infer(&trained, &graph, &features)?;
    write_atomic(&args.out, report.to_tsv().as_bytes())?;

    let snapshot = serde_json::json!({ "features": spec.to_string(), "task_config": trained.config });
    let mut manifest = RunManifest::new("transfer", snapshot, Some(seed));
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.graph)?;
    if let Some(p) = spec.path() {
        manifest.input(p)?;
    }
    manifest.output(&args.out);
    manifest.finish(started, &sidecar(&args.out, "manifest.json"))?;
    Ok(())
}
