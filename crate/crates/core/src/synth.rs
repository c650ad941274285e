//! Seeded synthetic corpora for tests, benchmarks and demos.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::UtteranceRecord;

const NE_TYPES: [&str; 6] = ["DISEASE", "DRUG", "SYMPTOM", "LOCATION", "PERSON", "ORGANIZATION"];

/// Three utterances sharing two entities: diabetes links 101 and 103,
/// metformin links 101 and 102.
pub fn toy_corpus() -> Vec<UtteranceRecord> {
    vec![
        UtteranceRecord::new("101", "the patient has diabetes and takes metformin")
            .with_entity("diabetes", "DISEASE")
            .with_entity("Metformin", "DRUG"),
        UtteranceRecord::new("102", "metformin lowers blood sugar")
            .with_entity("metformin", "DRUG")
            .with_entity("blood sugar", "SYMPTOM"),
        UtteranceRecord::new("103", "diabetes clinics in Hanoi are busy")
            .with_entity("Diabetes", "DISEASE")
            .with_entity("Hanoi", "LOCATION"),
    ]
}

/// Every utterance mentions 2–3 entities of its own; each entity appears in
/// exactly one utterance. Node degree alone then separates the two node
/// types.
pub fn degree_signal_corpus(n_utterances: usize, seed: u64) -> Vec<UtteranceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_entity = 0usize;
    (0..n_utterances)
        .map(|u| {
            let k = rng.random_range(2..=3);
            (0..k).fold(UtteranceRecord::new(format!("utt{u:05}"), format!("utterance {u}")), |r, _| {
                next_entity += 1;
                let t = NE_TYPES.choose(&mut rng).expect("non-empty");
                r.with_entity(format!("entity {next_entity}"), *t)
            })
        })
        .collect()
}

/// Utterances and entities fall into `communities` groups; each utterance
/// mentions `mentions` distinct entities, drawn from its own group with
/// probability `p_in` and uniformly otherwise.
pub fn planted_community_corpus(
    communities: usize,
    utterances_per: usize,
    entities_per: usize,
    mentions: usize,
    p_in: f64,
    seed: u64,
) -> Vec<UtteranceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mentions = mentions.min(entities_per);
    let mut corpus = Vec::with_capacity(communities * utterances_per);
    for c in 0..communities {
        for u in 0..utterances_per {
            let mut chosen = HashSet::new();
            let mut record = UtteranceRecord::new(format!("c{c}u{u}"), format!("utterance {u} of group {c}"));
            while chosen.len() < mentions {
                let group = if rng.random::<f64>() < p_in {
                    c
                } else {
                    rng.random_range(0..communities)
                };
                let e = rng.random_range(0..entities_per);
                if chosen.insert((group, e)) {
                    record = record.with_entity(format!("g{group} e{e}"), NE_TYPES[group % NE_TYPES.len()]);
                }
            }
            corpus.push(record);
        }
    }
    corpus
}

/// A corpus with the given numbers of utterances, distinct entities and
/// distinct utterance–entity incidences. Mentions include repeats within an
/// utterance and case/whitespace variants of the entity surface, which must
/// all collapse onto the same node and edge.
pub fn shaped_corpus(n_utterances: usize, n_entities: usize, n_incidences: usize, seed: u64) -> Vec<UtteranceRecord> {
    assert!(n_entities <= n_incidences && n_incidences <= n_utterances * n_entities);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links: Vec<Vec<usize>> = vec![Vec::new(); n_utterances];
    let mut seen = HashSet::with_capacity(n_incidences);
    // every entity is mentioned at least once
    for e in 0..n_entities {
        let u = rng.random_range(0..n_utterances);
        seen.insert((u, e));
        links[u].push(e);
    }
    let mut utterances: Vec<usize> = (0..n_utterances).collect();
    utterances.shuffle(&mut rng);
    for u in utterances {
        if seen.len() == n_incidences {
            break;
        }
        if links[u].is_empty() {
            let e = rng.random_range(0..n_entities);
            seen.insert((u, e));
            links[u].push(e);
        }
    }
    while seen.len() < n_incidences {
        let (u, e) = (rng.random_range(0..n_utterances), rng.random_range(0..n_entities));
        if seen.insert((u, e)) {
            links[u].push(e);
        }
    }
    let surface = |e: usize, variant: u32| match variant {
        0 => format!("entity {e}"),
        1 => format!("Entity {e}"),
        2 => format!("  ENTITY   {e} "),
        _ => format!("entity\t{e}"),
    };
    links
        .into_iter()
        .enumerate()
        .map(|(u, ents)| {
            let mut record = UtteranceRecord::new(format!("utt{u:05}"), format!("utterance {u}"));
            for &e in &ents {
                let t = NE_TYPES[e % NE_TYPES.len()];
                record = record.with_entity(surface(e, rng.random_range(0..4)), t);
                if rng.random::<f64>() < 0.1 {
                    record = record.with_entity(surface(e, rng.random_range(0..4)), t);
                }
            }
            record
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EntityType};

    #[test]
    fn degree_signal_degrees() {
        let g = build_graph(&degree_signal_corpus(50, 1)).unwrap();
        for (node, d) in g.nodes().iter().zip(g.degrees()) {
            match node.entity_type {
                EntityType::Utterance => assert!(d >= 2),
                EntityType::NamedEntity => assert_eq!(d, 1),
            }
        }
    }

    #[test]
    fn shaped_corpus_hits_counts() {
        let g = build_graph(&shaped_corpus(300, 120, 700, 3)).unwrap();
        assert_eq!(g.n_nodes(), 420);
        assert_eq!(g.n_edges(), 700);
    }

    #[test]
    fn planted_communities_mostly_internal() {
        let corpus = planted_community_corpus(4, 20, 15, 3, 0.9, 2);
        let internal = corpus
            .iter()
            .flat_map(|r| {
                let c = r.utterance_id[1..].split('u').next().unwrap().to_string();
                r.entities.iter().map(move |m| m.surface.starts_with(&format!("g{c} ")))
            })
            .filter(|&b| b)
            .count();
        assert!(internal as f64 > 0.8 * 240.0);
    }
}
