use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityType, KnowledgeGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeConstraint {
    /// Utterance–entity pairs only.
    #[default]
    BipartiteOnly,
    AnyPair,
}

/// Below this many candidate pairs, non-edges are enumerated rather than
/// drawn by rejection.
const ENUMERATE_BELOW: u64 = 1 << 20;

/// Pair space in canonical node order, so draws depend on node keys rather
/// than on node ids.
struct PairSpace {
    left: Vec<NodeId>,
    right: Vec<NodeId>,
    triangular: bool,
}

impl PairSpace {
    fn new(graph: &KnowledgeGraph, constraint: NegativeConstraint) -> Self {
        let order = graph.canonical_node_order();
        match constraint {
            NegativeConstraint::BipartiteOnly => {
                let of = |t| order.iter().copied().filter(|&u| graph.node(u).entity_type == t).collect();
                Self {
                    left: of(EntityType::Utterance),
                    right: of(EntityType::NamedEntity),
                    triangular: false,
                }
            }
            NegativeConstraint::AnyPair => Self {
                left: order.clone(),
                right: order,
                triangular: true,
            },
        }
    }

    fn raw_size(&self) -> u64 {
        self.left.len() as u64 * self.right.len() as u64
    }

    fn n_pairs(&self) -> u64 {
        if self.triangular {
            let m = self.left.len() as u64;
            m * m.saturating_sub(1) / 2
        } else {
            self.raw_size()
        }
    }

    /// Pair at raw index `p`, or `None` outside the (upper-triangular) space.
    fn decode(&self, p: u64) -> Option<(NodeId, NodeId)> {
        let (i, j) = ((p / self.right.len() as u64) as usize, (p % self.right.len() as u64) as usize);
        if self.triangular && i >= j {
            return None;
        }
        Some((self.left[i], self.right[j]))
    }
}

/// Uniformly samples `n` distinct non-edges of `graph` (no self-pairs).
/// Bipartite pairs come out as (utterance, entity); any-pair samples are
/// ordered by canonical rank.
pub fn sample_negative_edges(
    graph: &KnowledgeGraph,
    n: usize,
    seed: u64,
    constraint: NegativeConstraint,
) -> Result<Vec<(NodeId, NodeId)>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let space = PairSpace::new(graph, constraint);
    let edges = graph.edge_set();
    let available = space.n_pairs().saturating_sub(edges.len() as u64);
    if (n as u64) > available {
        return Err(Error::Sampling(format!(
            "requested {n} negative pairs but only {available} non-edges exist"
        )));
    }
    let is_edge = |(u, v): (NodeId, NodeId)| edges.contains(&(u.min(v), u.max(v)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if space.raw_size() <= ENUMERATE_BELOW || (n as u64) * 2 > available {
        let candidates: Vec<(NodeId, NodeId)> = (0..space.raw_size())
            .filter_map(|p| space.decode(p))
            .filter(|&pair| !is_edge(pair))
            .collect();
        return Ok(index::sample(&mut rng, candidates.len(), n)
            .into_iter()
            .map(|i| candidates[i])
            .collect());
    }

    // sparse regime: rejection sampling finishes in O(n) expected draws
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = rng.random_range(0..space.raw_size());
        let Some(pair) = space.decode(p) else { continue };
        if !is_edge(pair) && seen.insert(p) {
            out.push(pair);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, UtteranceRecord};

    fn complete_bipartite(utts: usize, ents: usize) -> KnowledgeGraph {
        let corpus: Vec<_> = (0..utts)
            .map(|u| {
                (0..ents).fold(UtteranceRecord::new(format!("u{u}"), "text"), |r, e| {
                    r.with_entity(format!("e{e}"), "ORG")
                })
            })
            .collect();
        build_graph(&corpus).unwrap()
    }

    #[test]
    fn complete_bipartite_has_no_bipartite_negatives() {
        let g = complete_bipartite(3, 4);
        assert!(matches!(
            sample_negative_edges(&g, 1, 0, NegativeConstraint::BipartiteOnly),
            Err(Error::Sampling(_))
        ));
        assert!(sample_negative_edges(&g, 0, 0, NegativeConstraint::BipartiteOnly).unwrap().is_empty());
        // 7 nodes → 21 pairs, 12 of them edges
        let any = sample_negative_edges(&g, 9, 0, NegativeConstraint::AnyPair).unwrap();
        let set: HashSet<_> = any.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        assert_eq!(set.len(), 9);
        assert!(sample_negative_edges(&g, 10, 0, NegativeConstraint::AnyPair).is_err());
    }
}
