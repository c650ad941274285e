use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::KnowledgeGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Dev,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Dev, Part::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Dev => "dev",
            Part::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitUnit {
    Nodes,
    Edges,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            dev: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let r = Self { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {parts:?}")));
        }
        Ok(())
    }

    /// Dev and test sizes are rounded, train takes the remainder.
    pub fn sizes(&self, total: usize) -> (usize, usize, usize) {
        let dev = ((self.dev * total as f64).round() as usize).min(total);
        let test = ((self.test * total as f64).round() as usize).min(total - dev);
        (total - dev - test, dev, test)
    }
}

/// Partition of nodes and/or edges into train/dev/test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSplit {
    pub node_assignment: Option<Vec<Part>>,
    pub edge_assignment: Option<Vec<Part>>,
    pub seed: u64,
}

impl GraphSplit {
    /// Both units split independently; edges use `seed + 1`.
    pub fn nodes_and_edges(graph: &KnowledgeGraph, ratios: SplitRatios, seed: u64) -> Result<Self> {
        let nodes = split_graph(graph, ratios, seed, SplitUnit::Nodes)?;
        let edges = split_graph(graph, ratios, seed.wrapping_add(1), SplitUnit::Edges)?;
        Ok(Self {
            node_assignment: nodes.node_assignment,
            edge_assignment: edges.edge_assignment,
            seed,
        })
    }

    pub fn nodes_in(&self, part: Part) -> Vec<usize> {
        select(self.node_assignment.as_deref(), part)
    }

    pub fn edges_in(&self, part: Part) -> Vec<usize> {
        select(self.edge_assignment.as_deref(), part)
    }
}

fn select(assign: Option<&[Part]>, part: Part) -> Vec<usize> {
    assign
        .unwrap_or_default()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p == part)
        .map(|(i, _)| i)
        .collect()
}

/// Uniform random partition of the chosen unit. Units are shuffled from
/// their canonical (key-sorted) order, so the result does not depend on how
/// node ids happen to be assigned.
pub fn split_graph(
    graph: &KnowledgeGraph,
    ratios: SplitRatios,
    seed: u64,
    unit: SplitUnit,
) -> Result<GraphSplit> {
    ratios.validate()?;
    let mut order = match unit {
        SplitUnit::Nodes => graph.canonical_node_order(),
        SplitUnit::Edges => graph.canonical_edge_order(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (train, dev, _) = ratios.sizes(order.len());
    let mut assignment = vec![Part::Test; order.len()];
    for (rank, &unit_idx) in order.iter().enumerate() {
        assignment[unit_idx] = if rank < train {
            Part::Train
        } else if rank < train + dev {
            Part::Dev
        } else {
            Part::Test
        };
    }
    Ok(match unit {
        SplitUnit::Nodes => GraphSplit {
            node_assignment: Some(assignment),
            edge_assignment: None,
            seed,
        },
        SplitUnit::Edges => GraphSplit {
            node_assignment: None,
            edge_assignment: Some(assignment),
            seed,
        },
    })
}
