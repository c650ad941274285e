use std::sync::{Arc, OnceLock};

use crate::autodiff::{SparseAdjacency, Tensor};
use crate::error::{shape_err, Result};
use crate::graph::{KnowledgeGraph, NodeId};

/// Message-passing structure over a fixed undirected edge list.
///
/// Neighbour lists keep edge-list order with the node itself first, so
/// relabeling nodes while keeping the edge list order reproduces every
/// per-node summation in the same order.
#[derive(Debug)]
pub struct GraphContext {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    neighbours: Vec<Vec<(NodeId, usize)>>,
    closed: ClosedNeighbourhoods,
    gcn: [OnceLock<Arc<SparseAdjacency>>; 2],
    mean: [OnceLock<Arc<SparseAdjacency>>; 2],
}

/// Flattened closed neighbourhoods, grouped by centre node.
#[derive(Debug, Clone)]
pub struct ClosedNeighbourhoods {
    /// Centre node of each entry.
    pub centres: Arc<[usize]>,
    /// Neighbour node of each entry (the centre itself for self-loops).
    pub neighbours: Arc<[usize]>,
    /// Edge index backing each entry, `None` for self-loops.
    pub edge_ref: Vec<Option<usize>>,
    /// `offsets[u]..offsets[u + 1]` is the segment of centre `u`.
    pub offsets: Arc<[usize]>,
}

impl ClosedNeighbourhoods {
    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.centres.iter().copied().zip(self.neighbours.iter().copied()).collect()
    }
}

impl GraphContext {
    pub fn new(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut neighbours = vec![Vec::new(); n];
        for (k, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return shape_err(format!("edge ({u}, {v}) outside {n} nodes"));
            }
            if u == v {
                return shape_err(format!("self-loop on node {u} in edge list"));
            }
            neighbours[u].push((v, k));
            neighbours[v].push((u, k));
        }
        let mut centres = Vec::with_capacity(n + 2 * edges.len());
        let mut nbrs = Vec::with_capacity(n + 2 * edges.len());
        let mut edge_ref = Vec::with_capacity(n + 2 * edges.len());
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for (u, list) in neighbours.iter().enumerate() {
            centres.push(u);
            nbrs.push(u);
            edge_ref.push(None);
            for &(v, k) in list {
                centres.push(u);
                nbrs.push(v);
                edge_ref.push(Some(k));
            }
            offsets.push(centres.len());
        }
        Ok(Self {
            n,
            edges: edges.to_vec(),
            neighbours,
            closed: ClosedNeighbourhoods {
                centres: centres.into(),
                neighbours: nbrs.into(),
                edge_ref,
                offsets: offsets.into(),
            },
            gcn: Default::default(),
            mean: Default::default(),
        })
    }

    pub fn from_graph(graph: &KnowledgeGraph) -> Result<Self> {
        Self::new(graph.n_nodes(), graph.edges())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.neighbours[u].len()
    }

    pub fn neighbours(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbours[u].iter().map(|&(v, _)| v)
    }

    pub fn closed(&self) -> &ClosedNeighbourhoods {
        &self.closed
    }

    /// `D̃^{-1/2} Ã D̃^{-1/2}` (with self-loops) or `D^{-1/2} A D^{-1/2}`.
    pub fn gcn_adjacency(&self, self_loops: bool) -> Arc<SparseAdjacency> {
        Arc::clone(self.gcn[self_loops as usize].get_or_init(|| {
            let extra = usize::from(self_loops);
            let deg: Vec<f64> = (0..self.n).map(|u| (self.degree(u) + extra) as f64).collect();
            let entries = self.entries(self_loops, |u, v| 1.0 / (deg[u] * deg[v]).sqrt());
            Arc::new(SparseAdjacency::from_entries(self.n, &entries).expect("valid by construction"))
        }))
    }

    /// Row-normalised adjacency: `(M h)[v]` is the mean of `h` over the
    /// (closed, if `self_loops`) neighbourhood of `v`.
    pub fn mean_adjacency(&self, self_loops: bool) -> Arc<SparseAdjacency> {
        Arc::clone(self.mean[self_loops as usize].get_or_init(|| {
            let extra = usize::from(self_loops);
            let entries = self.entries(self_loops, |u, _| 1.0 / (self.degree(u) + extra) as f64);
            Arc::new(SparseAdjacency::from_entries(self.n, &entries).expect("valid by construction"))
        }))
    }

    fn entries(&self, self_loops: bool, weight: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize, f64)> {
        let mut entries = Vec::with_capacity(self.n + 2 * self.edges.len());
        for u in 0..self.n {
            if self_loops {
                entries.push((u, u, weight(u, u)));
            }
            for v in self.neighbours(u) {
                entries.push((u, v, weight(u, v)));
            }
        }
        entries
    }

    /// Per-entry edge features for the closed neighbourhoods; self-loop rows
    /// are zero.
    pub fn closed_edge_features(&self, edge_features: &Tensor) -> Result<Tensor> {
        if edge_features.rows() != self.edges.len() {
            return shape_err(format!(
                "{} edge-feature rows for {} edges",
                edge_features.rows(),
                self.edges.len()
            ));
        }
        let mut out = Tensor::zeros(self.closed.len(), edge_features.cols());
        for (i, r) in self.closed.edge_ref.iter().enumerate() {
            if let Some(k) = r {
                out.row_mut(i).copy_from_slice(edge_features.row(*k));
            }
        }
        Ok(out)
    }
}

/// Symmetrically normalised adjacency with self-loops for a whole graph.
pub fn normalize_adjacency(graph: &KnowledgeGraph) -> Result<Arc<SparseAdjacency>> {
    Ok(GraphContext::from_graph(graph)?.gcn_adjacency(true))
}
