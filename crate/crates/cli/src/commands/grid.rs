use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::Args;
use speechkg::embed::FeatureMatrix;
use speechkg::layers::LayerKind;
use speechkg::tasks::loss_curve_csv;

use super::fit;
use crate::features::load_file;
use crate::{read_graph, sidecar, write_atomic, CliError, CliResult, FeatureSpec, RunManifest, Settings, WithContext};

pub const HEADER: &str = "model\tembedding\tap\tauc\n";

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// One embedding file per embedding; the file stem names the row.
    #[arg(long)]
    pub embeddings_dir: PathBuf,
    /// Results TSV: model, embedding, test AP, test AUC.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each cell's loss curve here as `<model>_<embedding>.csv`.
    #[arg(long)]
    pub curves_dir: Option<PathBuf>,
    /// Cells trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `model` and `features` are ignored here: the grid covers all of them.
    #[command(flatten)]
    pub settings: Settings,
}

struct Column {
    name: String,
    path: Option<PathBuf>,
    features: Result<FeatureMatrix, String>,
}

type CellResult = Result<(Option<f64>, Option<f64>, String), CliError>;

fn embedding_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).context(|| dir.display().to_string())? {
        let entry = entry.context(|| dir.display().to_string())?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && entry.file_type().context(|| dir.display().to_string())?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Every model against random features plus each embedding file. A failed
/// cell is reported in its row; the command fails only if every cell does.
pub fn cmd_grid(args: &GridArgs) -> CliResult<()> {
    let started = Instant::now();
    let settings = args.settings.clone().resolve(args.config.as_deref())?;
    let task = settings.task()?;
    for kind in LayerKind::ALL {
        settings.task_config(task, kind)?;
        settings.model_spec(kind)?;
    }
    let missing = settings.missing()?;
    let graph = read_graph(&args.graph)?;

    let random = FeatureSpec::Random {
        dim: settings.random_dim.unwrap_or(64),
        seed: None,
    };
    let mut columns = vec![Column {
        name: "random".into(),
        path: None,
        features: random.load(&graph, settings.seed(), missing).map_err(|e| e.to_string()),
    }];
    for path in embedding_files(&args.embeddings_dir)? {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let features = load_file(&path, &graph, missing).map_err(|e| {
            log::error!("{e}");
            e.to_string()
        });
        columns.push(Column {
            name,
            path: Some(path),
            features,
        });
    }

    let cells: Vec<(LayerKind, usize)> = LayerKind::ALL
        .iter()
        .flat_map(|&k| (0..columns.len()).map(move |c| (k, c)))
        .collect();
    let results: Vec<Mutex<Option<CellResult>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let run_cell = |kind: LayerKind, col: &Column| -> CellResult {
        let features = col.features.as_ref().map_err(|e| CliError::Input(e.clone()))?;
        let (trained, _) = fit(&graph, features, kind, &settings)?;
        let test = trained
            .report
            .get("test")
            .ok_or_else(|| CliError::Failed("report has no test scope".into()))?;
        Ok((test.ap, test.auc, loss_curve_csv(&trained.loss_curve)))
    };
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(kind, c)) = cells.get(i) else { break };
                log::info!("grid cell {kind} × {}", columns[c].name);
                let r = run_cell(kind, &columns[c]);
                if let Err(e) = &r {
                    log::error!("{kind} × {}: {e}", columns[c].name);
                }
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let results: Vec<CellResult> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every cell ran"))
        .collect();

    let fmt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    let mut tsv = String::from(HEADER);
    for (&(kind, c), r) in cells.iter().zip(&results) {
        let (ap, auc) = match r {
            Ok((ap, auc, _)) => (fmt(*ap), fmt(*auc)),
            Err(_) => ("failed".into(), "failed".into()),
        };
        let _ = writeln!(tsv, "{}\t{}\t{ap}\t{auc}", kind.name(), columns[c].name);
    }
    write_atomic(&args.out, tsv.as_bytes())?;

    let mut manifest = RunManifest::new(
        "grid",
        serde_json::json!({ "settings": settings, "random": random.to_string() }),
        Some(settings.seed()),
    );
    manifest.input(&args.graph)?;
    for col in &columns {
        if let Some(p) = &col.path {
            manifest.input(p)?;
        }
    }
    if let Some(p) = &args.config {
        manifest.input(p)?;
    }
    manifest.output(&args.out);
    if let Some(dir) = &args.curves_dir {
        std::fs::create_dir_all(dir).context(|| dir.display().to_string())?;
        for (&(kind, c), r) in cells.iter().zip(&results) {
            if let Ok((_, _, csv)) = r {
                let path = dir.join(format!("{}_{}.csv", kind.name(), columns[c].name));
                write_atomic(&path, csv.as_bytes())?;
                manifest.output(&path);
            }
        }
    }
    manifest.finish(started, &sidecar(&args.out, "manifest.json"))?;

    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed == results.len() {
        let first = results.into_iter().find_map(Result::err).expect("at least one cell");
        log::error!("all {failed} grid cells failed");
        return Err(first);
    }
    if failed > 0 {
        log::warn!("{failed} of {} grid cells failed", results.len());
    }
    Ok(())
}
