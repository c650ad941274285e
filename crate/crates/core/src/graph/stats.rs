use std::fmt::Write as _;

use serde::Serialize;

use super::{EntityType, GraphSplit, KnowledgeGraph, Part};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PartCounts {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_utterance_nodes: usize,
    pub n_entity_nodes: usize,
}

/// Node and edge counts, overall and per split part when a split is given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub total: PartCounts,
    pub parts: Option<[(Part, PartCounts); 3]>,
}

pub fn graph_stats(graph: &KnowledgeGraph, split: Option<&GraphSplit>) -> StatsReport {
    let count_nodes = |filter: &dyn Fn(usize) -> bool| {
        let mut c = PartCounts::default();
        for node in graph.nodes().iter().filter(|n| filter(n.node_id)) {
            c.n_nodes += 1;
            match node.entity_type {
                EntityType::Utterance => c.n_utterance_nodes += 1,
                EntityType::NamedEntity => c.n_entity_nodes += 1,
            }
        }
        c
    };
    let mut total = count_nodes(&|_| true);
    total.n_edges = graph.n_edges();

    let parts = split.map(|s| {
        Part::ALL.map(|part| {
            let mut c = match &s.node_assignment {
                Some(a) => count_nodes(&|i| a[i] == part),
                None => PartCounts::default(),
            };
            c.n_edges = s
                .edge_assignment
                .as_ref()
                .map_or(0, |a| a.iter().filter(|p| **p == part).count());
            (part, c)
        })
    });
    StatsReport { total, parts }
}

impl StatsReport {
    /// Tab-separated table with one row per count and one column per part.
    pub fn to_tsv(&self) -> String {
        let mut columns: Vec<(&str, PartCounts)> = Vec::new();
        if let Some(parts) = &self.parts {
            for (part, counts) in parts {
                let name = match part {
                    Part::Train => "Train",
                    Part::Dev => "Dev",
                    Part::Test => "Test",
                };
                columns.push((name, *counts));
            }
        }
        columns.push(("Total", self.total));

        let mut out = String::new();
        for (name, _) in &columns {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        let rows: [(&str, fn(&PartCounts) -> usize); 4] = [
            ("#Nodes", |c| c.n_nodes),
            ("#Edges", |c| c.n_edges),
            ("#utterance nodes", |c| c.n_utterance_nodes),
            ("#named_entity nodes", |c| c.n_entity_nodes),
        ];
        for (label, get) in rows {
            out.push_str(label);
            for (_, c) in &columns {
                let _ = write!(out, "\t{}", get(c));
            }
            out.push('\n');
        }
        out
    }
}
