//! The `speechkg` command line: `build`, `stats`, `train`, `grid` and
//! `transfer`. Each command is also callable as a function so tests can
//! drive it without spawning a process.

pub mod commands;
pub mod config;
pub mod features;
pub mod manifest;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use clap::{Parser, Subcommand};
use speechkg::graph::KnowledgeGraph;

pub use commands::build::{cmd_build, BuildArgs};
pub use commands::grid::{cmd_grid, GridArgs};
pub use commands::stats::{cmd_stats, StatsArgs};
pub use commands::train::{cmd_train, TrainArgs};
pub use commands::transfer::{cmd_transfer, TransferArgs};
pub use config::Settings;
pub use features::FeatureSpec;
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
/// Bad configuration, unreadable or malformed input.
pub const EXIT_INPUT: i32 = 2;
/// Training produced a non-finite loss.
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: speechkg::Error,
    },
    #[error(transparent)]
    Core(#[from] speechkg::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use speechkg::Error as E;
        let core = match self {
            CliError::Input(_) => return EXIT_INPUT,
            CliError::Failed(_) => return EXIT_FAILURE,
            CliError::Context { source, .. } => source,
            CliError::Core(e) => e,
        };
        match core {
            E::Training { .. } => EXIT_DIVERGED,
            E::Metric(_) => EXIT_FAILURE,
            _ => EXIT_INPUT,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a path (or other context) to core errors.
pub(crate) trait WithContext<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T, E: Into<speechkg::Error>> WithContext<T> for std::result::Result<T, E> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::Context {
            context: what(),
            source: e.into(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "speechkg", version, about = "Knowledge graphs from NE-annotated transcripts, and GNNs over them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a graph from a JSONL corpus.
    Build(BuildArgs),
    /// Node/edge counts, per split part.
    Stats(StatsArgs),
    /// Train one model (the "inductive" setting: split inside one graph).
    Train(TrainArgs),
    /// Every model against random features and each embedding file.
    Grid(GridArgs),
    /// Apply a checkpoint to another graph without retraining (the
    /// "transductive" setting).
    Transfer(TransferArgs),
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Build(a) => cmd_build(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Grid(a) => cmd_grid(&a),
        Command::Transfer(a) => cmd_transfer(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn read_graph(path: &Path) -> CliResult<KnowledgeGraph> {
    let file = File::open(path).context(|| path.display().to_string())?;
    serde_json::from_reader(BufReader::new(file)).context(|| path.display().to_string())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).context(|| dir.display().to_string())?;
    tmp.write_all(bytes).context(|| path.display().to_string())?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .context(|| path.display().to_string())?;
    Ok(())
}

/// `dir/graph.json` → `dir/graph.<suffix>`.
pub(crate) fn sidecar(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}
