use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use speechkg::layers::encode_checkpoint;
use speechkg::tasks::loss_curve_csv;

use super::fit;
use crate::{read_graph, write_atomic, CliResult, RunManifest, Settings, WithContext};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_FILE: &str = "loss.csv";
pub const EVAL_FILE: &str = "eval.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Graph JSON from `build`.
    #[arg(long)]
    pub graph: PathBuf,
    /// Receives model.ckpt, loss.csv, eval.tsv and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let started = Instant::now();
    let settings = args.settings.clone().resolve(args.config.as_deref())?;
    settings.check_setting()?;
    let kind = settings.model()?;
    let task = settings.task()?;
    // fail on bad settings before touching the inputs
    let config = settings.task_config(task, kind)?;
    let features_spec = settings.features()?;

    let graph = read_graph(&args.graph)?;
    let features = features_spec.load(&graph, settings.seed(), settings.missing()?)?;
    log::info!(
        "training {kind} for {task} on {} nodes, {} epochs, features {features_spec}",
        graph.n_nodes(),
        config.epochs
    );
    let (trained, _) = fit(&graph, &features, kind, &settings)?;
    log::info!("best dev loss at epoch {}", trained.best_epoch);

    std::fs::create_dir_all(&args.out_dir).context(|| args.out_dir.display().to_string())?;
    let ckpt = args.out_dir.join(CHECKPOINT_FILE);
    let loss = args.out_dir.join(LOSS_FILE);
    let eval = args.out_dir.join(EVAL_FILE);
    write_atomic(&ckpt, &encode_checkpoint(&trained.model, trained.config.seed, trained.metadata())?)?;
    write_atomic(&loss, loss_curve_csv(&trained.loss_curve).as_bytes())?;
    write_atomic(&eval, trained.report.to_tsv().as_bytes())?;

    let snapshot = serde_json::json!({
        "settings": settings,
        "task_config": trained.config,
        "model": trained.model.spec(),
        "features": features_spec.to_string(),
    });
    let mut manifest = RunManifest::new("train", snapshot, Some(trained.config.seed));
    manifest.input(&args.graph)?;
    if let Some(p) = features_spec.path() {
        manifest.input(p)?;
    }
    if let Some(p) = &args.config {
        manifest.input(p)?;
    }
    for p in [&ckpt, &loss, &eval] {
        manifest.output(p);
    }
    manifest.finish(started, &args.out_dir.join(MANIFEST_FILE))?;
    Ok(())
}
