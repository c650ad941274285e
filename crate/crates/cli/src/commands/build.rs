use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use speechkg::graph::{build_graph, build_graph_with_labels, graph_stats, read_corpus};

use crate::{sidecar, write_atomic, CliResult, RunManifest, WithContext};

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    /// JSONL corpus, one utterance per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Graph JSON to write; stats go next to it as `<stem>.stats.tsv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Declared ne_type label set, one per line. Unknown types are then errors.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

pub fn cmd_build(args: &BuildArgs) -> CliResult<()> {
    let started = Instant::now();
    let corpus_name = args.corpus.display().to_string();
    let file = File::open(&args.corpus).context(|| corpus_name.clone())?;
    let corpus = read_corpus(BufReader::new(file)).context(|| corpus_name.clone())?;
    let graph = match &args.labels {
        Some(path) => {
            let text = std::fs::read_to_string(path).context(|| path.display().to_string())?;
            let labels: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
            build_graph_with_labels(&corpus, &labels)
        }
        None => build_graph(&corpus),
    }
    .context(|| corpus_name.clone())?;

    let mut json = serde_json::to_vec(&graph).expect("graph serialises");
    json.push(b'\n');
    write_atomic(&args.out, &json)?;
    let stats_path = sidecar(&args.out, "stats.tsv");
    write_atomic(&stats_path, graph_stats(&graph, None).to_tsv().as_bytes())?;
    log::info!(
        "{} utterances → {} nodes, {} edges",
        corpus.len(),
        graph.n_nodes(),
        graph.n_edges()
    );

    let mut manifest = RunManifest::new("build", serde_json::json!({ "labels": args.labels }), None);
    manifest.input(&args.corpus)?;
    if let Some(p) = &args.labels {
        manifest.input(p)?;
    }
    manifest.output(&args.out);
    manifest.output(&stats_path);
    manifest.finish(started, &sidecar(&args.out, "manifest.json"))?;
    Ok(())
}
