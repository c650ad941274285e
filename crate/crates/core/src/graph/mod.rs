//! Bipartite utterance / named-entity knowledge graph.
//!
//! Every utterance becomes a node, every distinct (canonicalized) entity
//! surface becomes a node, and an undirected edge joins an utterance to each
//! entity it mentions. Entities mentioned by several utterances are shared,
//! so co-mentioned entities sit two hops apart.

mod corpus;
mod split;
mod stats;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{read_corpus, write_corpus, EntityMention, UtteranceRecord};
pub use split::{split_graph, GraphSplit, Part, SplitRatios, SplitUnit};
pub use stats::{graph_stats, PartCounts, StatsReport};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    Utterance,
    NamedEntity,
}

impl EntityType {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Utterance => "utterance",
            EntityType::NamedEntity => "named_entity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub node_id: NodeId,
    pub key: String,
    pub entity_type: EntityType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ne_type: Option<String>,
}

/// Lowercases, trims and collapses internal whitespace runs to one space.
pub fn canonicalize_entity(surface: &str) -> Result<String> {
    let joined = surface.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.is_empty() {
        return Err(Error::InvalidEntity(surface.to_string()));
    }
    Ok(joined.to_lowercase())
}

/// Immutable bipartite graph. Construct with [`build_graph`] or
/// [`KnowledgeGraph::from_parts`], both of which enforce the invariants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KnowledgeGraph {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    ne_type_vocabulary: Vec<String>,
}

#[derive(Deserialize)]
struct RawGraph {
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    ne_type_vocabulary: Vec<String>,
}

impl<'de> Deserialize<'de> for KnowledgeGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGraph::deserialize(d)?;
        KnowledgeGraph::from_parts(raw.nodes, raw.edges, raw.ne_type_vocabulary)
            .map_err(serde::de::Error::custom)
    }
}

impl KnowledgeGraph {
    /// Validates and assembles a graph from explicit nodes and edges.
    pub fn from_parts(
        nodes: Vec<Node>,
        edges: Vec<(NodeId, NodeId)>,
        ne_type_vocabulary: Vec<String>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut keys = HashSet::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            if node.node_id != i {
                return Err(Error::Corpus(format!(
                    "node ids must be dense: position {i} holds id {}",
                    node.node_id
                )));
            }
            match (node.entity_type, &node.ne_type) {
                (EntityType::NamedEntity, None) => {
                    return Err(Error::Corpus(format!("entity node {i} lacks an ne_type")))
                }
                (EntityType::Utterance, Some(_)) => {
                    return Err(Error::Corpus(format!("utterance node {i} carries an ne_type")))
                }
                _ => {}
            }
            if !keys.insert((node.entity_type, node.key.as_str())) {
                return Err(Error::Corpus(format!("duplicate node key {:?}", node.key)));
            }
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::Corpus(format!("edge ({u}, {v}) out of range")));
            }
            if nodes[u].entity_type == nodes[v].entity_type {
                return Err(Error::Corpus(format!("edge ({u}, {v}) is not bipartite")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Corpus(format!("duplicate edge ({u}, {v})")));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        if let Some(node) = nodes
            .iter()
            .find(|nd| nd.entity_type == EntityType::NamedEntity && degree[nd.node_id] == 0)
        {
            return Err(Error::Corpus(format!("entity node {:?} has no edges", node.key)));
        }
        Ok(Self {
            nodes,
            edges,
            ne_type_vocabulary,
        })
    }

    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            ne_type_vocabulary: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn ne_type_vocabulary(&self) -> &[String] {
        &self.ne_type_vocabulary
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn keys(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.key.clone()).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Edge set with each pair stored as (min, max).
    pub fn edge_set(&self) -> HashSet<(NodeId, NodeId)> {
        self.edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect()
    }

    /// Node ids ordered by (entity_type, key). The order depends only on node
    /// content, so it is stable under relabeling of node ids.
    pub fn canonical_node_order(&self) -> Vec<NodeId> {
        let mut order: Vec<NodeId> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            (na.entity_type, &na.key).cmp(&(nb.entity_type, &nb.key))
        });
        order
    }

    /// Edge indices ordered by the keys of their (utterance, entity) endpoints.
    pub fn canonical_edge_order(&self) -> Vec<usize> {
        let key = |i: usize| {
            let (u, v) = self.edges[i];
            let (utt, ent) = if self.nodes[u].entity_type == EntityType::Utterance {
                (u, v)
            } else {
                (v, u)
            };
            (self.nodes[utt].key.as_str(), self.nodes[ent].key.as_str())
        };
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by(|&a, &b| key(a).cmp(&key(b)));
        order
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`. Edge order
    /// is preserved.
    pub fn relabel(&self, perm: &[NodeId]) -> Result<Self> {
        let n = self.nodes.len();
        if perm.len() != n {
            return Err(Error::Config(format!(
                "permutation has length {} for {n} nodes",
                perm.len()
            )));
        }
        let mut nodes: Vec<Option<Node>> = vec![None; n];
        for (old, node) in self.nodes.iter().enumerate() {
            let new = perm[old];
            if new >= n || nodes[new].is_some() {
                return Err(Error::Config("not a permutation".into()));
            }
            nodes[new] = Some(Node {
                node_id: new,
                ..node.clone()
            });
        }
        let nodes = nodes.into_iter().map(|n| n.expect("filled")).collect();
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Self::from_parts(nodes, edges, self.ne_type_vocabulary.clone())
    }

    /// Copy of the graph restricted to the given edges. Nodes are kept, so
    /// entities may end up isolated; the bipartite checks are not rerun.
    pub fn with_edges(&self, edges: Vec<(NodeId, NodeId)>) -> Self {
        Self {
            nodes: self.nodes.clone(),
            edges,
            ne_type_vocabulary: self.ne_type_vocabulary.clone(),
        }
    }
}

/// Builds the graph with the ne_type vocabulary inferred from the corpus in
/// first-seen order.
pub fn build_graph(corpus: &[UtteranceRecord]) -> Result<KnowledgeGraph> {
    build(corpus, None)
}

/// Builds the graph, rejecting any mention whose ne_type is not declared.
pub fn build_graph_with_labels(corpus: &[UtteranceRecord], labels: &[String]) -> Result<KnowledgeGraph> {
    build(corpus, Some(labels))
}

fn build(corpus: &[UtteranceRecord], labels: Option<&[String]>) -> Result<KnowledgeGraph> {
    let declared: Option<HashSet<&str>> = labels.map(|l| l.iter().map(String::as_str).collect());
    let mut vocabulary: Vec<String> = labels.map(<[String]>::to_vec).unwrap_or_default();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut utterances = HashSet::new();
    let mut entities: HashMap<String, NodeId> = HashMap::new();

    for record in corpus {
        if record.utterance_id.is_empty() {
            return Err(Error::Corpus("empty utterance_id".into()));
        }
        if !utterances.insert(record.utterance_id.as_str()) {
            return Err(Error::Corpus(format!(
                "duplicate utterance_id {:?}",
                record.utterance_id
            )));
        }
        let utt = nodes.len();
        nodes.push(Node {
            node_id: utt,
            key: record.utterance_id.clone(),
            entity_type: EntityType::Utterance,
            ne_type: None,
        });
        let mut linked = HashSet::new();
        for mention in &record.entities {
            match &declared {
                Some(set) if !set.contains(mention.ne_type.as_str()) => {
                    return Err(Error::Label {
                        utterance_id: record.utterance_id.clone(),
                        ne_type: mention.ne_type.clone(),
                    })
                }
                None if !vocabulary.contains(&mention.ne_type) => {
                    vocabulary.push(mention.ne_type.clone())
                }
                _ => {}
            }
            let key = canonicalize_entity(&mention.surface)?;
            let ent = match entities.get(&key) {
                Some(&id) => {
                    let first = nodes[id].ne_type.as_deref().unwrap_or_default();
                    if first != mention.ne_type {
                        log::warn!(
                            "entity {key:?} seen as {:?} in utterance {:?}, keeping first type {first:?}",
                            mention.ne_type,
                            record.utterance_id
                        );
                    }
                    id
                }
                None => {
                    let id = nodes.len();
                    nodes.push(Node {
                        node_id: id,
                        key: key.clone(),
                        entity_type: EntityType::NamedEntity,
                        ne_type: Some(mention.ne_type.clone()),
                    });
                    entities.insert(key, id);
                    id
                }
            };
            if linked.insert(ent) {
                edges.push((utt, ent));
            }
        }
    }
    KnowledgeGraph::from_parts(nodes, edges, vocabulary)
}
