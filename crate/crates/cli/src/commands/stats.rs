use std::path::PathBuf;

use clap::Args;
use speechkg::graph::graph_stats;

use crate::{read_graph, write_atomic, CliResult, Settings};

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// TSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print whole-graph counts only, without the train/dev/test columns.
    #[arg(long)]
    pub no_split: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

/// Counts per part use the split a `train` run with the same settings would use.
pub fn cmd_stats(args: &StatsArgs) -> CliResult<()> {
    let settings = args.settings.clone().resolve(args.config.as_deref())?;
    let graph = read_graph(&args.graph)?;
    let tsv = if args.no_split {
        graph_stats(&graph, None).to_tsv()
    } else {
        let kind = settings.model().unwrap_or(speechkg::layers::LayerKind::Gcn);
        let split = settings.task_config(settings.task()?, kind)?.split_for(&graph)?;
        graph_stats(&graph, Some(&split)).to_tsv()
    };
    match &args.out {
        Some(path) => write_atomic(path, tsv.as_bytes()),
        None => {
            print!("{tsv}");
            Ok(())
        }
    }
}
