use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use speechkg::embed::{load_features, random_features, EmbeddingFile, FeatureMatrix, MissingPolicy};
use speechkg::graph::KnowledgeGraph;
use speechkg::tasks::seeds;

use crate::{CliError, CliResult, WithContext};

/// `random:<dim>[:<seed>]` or `file:<path>`. Random features without their
/// own seed derive one from the run seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSpec {
    Random { dim: usize, seed: Option<u64> },
    File(PathBuf),
}

impl FromStr for FeatureSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || CliError::Input(format!("features {s:?}: expected random:<dim>[:<seed>] or file:<path>"));
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(bad());
            }
            return Ok(FeatureSpec::File(path.into()));
        }
        let rest = s.strip_prefix("random:").ok_or_else(bad)?;
        let mut it = rest.split(':');
        let dim = it.next().and_then(|d| d.parse().ok()).filter(|&d| d > 0).ok_or_else(bad)?;
        let seed = match it.next() {
            Some(v) => Some(v.parse().map_err(|_| bad())?),
            None => None,
        };
        if it.next().is_some() {
            return Err(bad());
        }
        Ok(FeatureSpec::Random { dim, seed })
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSpec::Random { dim, seed: Some(s) } => write!(f, "random:{dim}:{s}"),
            FeatureSpec::Random { dim, seed: None } => write!(f, "random:{dim}"),
            FeatureSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FeatureSpec {
    pub fn path(&self) -> Option<&Path> {
        match self {
            FeatureSpec::File(p) => Some(p),
            FeatureSpec::Random { .. } => None,
        }
    }

    pub fn load(&self, graph: &KnowledgeGraph, run_seed: u64, missing: MissingPolicy) -> CliResult<FeatureMatrix> {
        match self {
            FeatureSpec::Random { dim, seed } => {
                let seed = seed.unwrap_or(run_seed.wrapping_add(seeds::FEATURES));
                Ok(random_features(graph.n_nodes(), *dim, seed)?)
            }
            FeatureSpec::File(path) => load_file(path, graph, missing),
        }
    }
}

pub(crate) fn load_file(path: &Path, graph: &KnowledgeGraph, missing: MissingPolicy) -> CliResult<FeatureMatrix> {
    let file = EmbeddingFile::read(path).context(|| path.display().to_string())?;
    let (matrix, report) = load_features(&file, graph, missing).context(|| path.display().to_string())?;
    log::info!(
        "{}: {} nodes matched, {} zero-filled, dim {}",
        path.display(),
        report.matched,
        report.zero_filled,
        matrix.dim()
    );
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        for s in ["random:64", "random:8:3", "file:emb/phobert.emb"] {
            assert_eq!(s.parse::<FeatureSpec>().unwrap().to_string(), s);
        }
        for s in ["random", "random:0", "random:x", "random:4:1:2", "file:", "phobert.emb"] {
            assert!(s.parse::<FeatureSpec>().is_err(), "{s}");
        }
    }
}
