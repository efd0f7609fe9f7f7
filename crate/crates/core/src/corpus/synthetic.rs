//! Deterministic synthetic multi-hop corpora.
//!
//! Every query plants a chain `e0 -> d1 -> e1 -> d2 -> ...` where document
//! `d_j` mentions entities `e_{j-1}` and `e_j`. The question names only `e0`
//! plus a few words taken from `d1`, so later chain documents share no
//! query terms and are reachable only through the bridging entities.
//! About half of the collection is distractor text, and the top 1% of the
//! entity pool is used as hubs mentioned by many documents.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Passage, Query};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticParams {
    pub n_docs: usize,
    pub n_entities: usize,
    pub hops: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_docs: 1000,
            n_entities: 1500,
            hops: 2,
            seed: 7,
        }
    }
}

const FILLER_PER_DOC: usize = 24;
const QUERY_TERMS_FROM_FIRST_HOP: usize = 3;
const DISTRACTOR_ENTITIES: usize = 2;
const HUB_PROBABILITY: f64 = 0.5;

const NAME_ONSETS: [&str; 16] = [
    "V", "Z", "K", "Th", "Dr", "Qu", "X", "Br", "Gw", "Sk", "Tr", "Pl", "Fr", "Gl", "Kr", "Wr",
];
const NAME_NUCLEI: [&str; 16] = [
    "ar", "el", "oz", "iv", "um", "ax", "on", "yr", "et", "ul", "or", "ix", "en", "ab", "oq", "iz",
];
const NAME_CODAS: [&str; 16] = [
    "dan", "mir", "vek", "tos", "rix", "lun", "gar", "bex", "nov", "zel", "kin", "rov", "sal",
    "tev", "quo", "dix",
];
const FILLER_A: [&str; 20] = [
    "ka", "lo", "mi", "pa", "ru", "se", "ti", "no", "be", "da", "fu", "ge", "hi", "jo", "le", "ma",
    "ne", "po", "sa", "to",
];
const FILLER_B: [&str; 20] = [
    "ble", "dor", "fin", "gat", "hum", "lem", "mos", "nip", "pel", "rak", "sot", "tun", "wem",
    "bar", "cil", "dep", "fal", "gor", "lit", "mun",
];

/// Surface form of entity `i`: two capitalized tokens, unique for
/// `i < 4096 * 4096`.
fn entity_name(i: usize) -> String {
    let token = |x: usize| {
        format!(
            "{}{}{}",
            NAME_ONSETS[x % 16],
            NAME_NUCLEI[(x / 16) % 16],
            NAME_CODAS[(x / 256) % 16]
        )
    };
    let (hi, lo) = (i / 4096, i % 4096);
    format!("{} {}", token(lo), token((hi * 613 + lo * 7) % 4096))
}

fn filler_word(i: usize) -> String {
    format!("{}{}", FILLER_A[i % 20], FILLER_B[(i / 20) % 20])
}

const FILLER_VOCAB: usize = 400;

struct DocPlan {
    entities: Vec<usize>,
    filler: Vec<usize>,
}

impl DocPlan {
    /// Interleaves entity names between filler runs so no two names touch.
    fn render(&self) -> String {
        let mut words: Vec<String> = Vec::new();
        let slots = self.entities.len() + 1;
        let per = self.filler.len() / slots;
        let mut fi = self.filler.iter();
        for &e in &self.entities {
            for _ in 0..per.max(1) {
                if let Some(&w) = fi.next() {
                    words.push(filler_word(w));
                }
            }
            words.push(entity_name(e));
        }
        for &w in fi {
            words.push(filler_word(w));
        }
        let mut text = words.join(" ");
        text.push('.');
        text
    }
}

/// Builds a corpus with one planted chain per query. The same parameters
/// always produce the same corpus and queries.
pub fn generate_synthetic(params: SyntheticParams) -> Result<(Corpus, Vec<Query>)> {
    let SyntheticParams {
        n_docs,
        n_entities,
        hops,
        seed,
    } = params;
    if hops == 0 {
        return Err(Error::param("hops must be at least 1"));
    }
    if n_docs < 2 * hops {
        return Err(Error::param(format!(
            "n_docs ({n_docs}) must be at least 2*hops ({})",
            2 * hops
        )));
    }
    if n_entities < hops + 1 {
        return Err(Error::param(format!(
            "n_entities ({n_entities}) must be at least hops+1 ({})",
            hops + 1
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_hubs = n_entities / 100;
    let pool = n_entities - n_hubs;
    let n_chains = n_docs / (2 * hops);
    let chain_docs = n_chains * hops;

    let random_filler = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        (0..FILLER_PER_DOC)
            .map(|_| rng.random_range(0..FILLER_VOCAB))
            .collect()
    };
    let maybe_hub = |rng: &mut ChaCha8Rng, entities: &mut Vec<usize>| {
        if n_hubs > 0 && rng.random_bool(HUB_PROBABILITY) {
            entities.push(rng.random_range(0..n_hubs));
        }
    };

    let mut plans: Vec<DocPlan> = Vec::with_capacity(n_docs);
    let mut chains: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(n_chains);
    for c in 0..n_chains {
        let chain_entities: Vec<usize> = (0..=hops)
            .map(|j| n_hubs + (c * (hops + 1) + j) % pool)
            .collect();
        let mut doc_slots = Vec::with_capacity(hops);
        for j in 0..hops {
            let mut entities = vec![chain_entities[j], chain_entities[j + 1]];
            entities.push(n_hubs + rng.random_range(0..pool));
            maybe_hub(&mut rng, &mut entities);
            doc_slots.push(plans.len());
            plans.push(DocPlan {
                entities,
                filler: random_filler(&mut rng),
            });
        }
        chains.push((chain_entities, doc_slots));
    }
    for _ in chain_docs..n_docs {
        let mut entities: Vec<usize> = (0..DISTRACTOR_ENTITIES)
            .map(|_| n_hubs + rng.random_range(0..pool))
            .collect();
        maybe_hub(&mut rng, &mut entities);
        plans.push(DocPlan {
            entities,
            filler: random_filler(&mut rng),
        });
    }

    // Shuffle ordinals so chain documents are not adjacent.
    let mut order: Vec<usize> = (0..n_docs).collect();
    order.shuffle(&mut rng);
    let mut ordinal_of = vec![0usize; n_docs];
    for (ordinal, &slot) in order.iter().enumerate() {
        ordinal_of[slot] = ordinal;
    }

    let passages: Vec<Passage> = order
        .iter()
        .enumerate()
        .map(|(ordinal, &slot)| {
            let plan = &plans[slot];
            Passage {
                id: format!("syn{ordinal:06}"),
                title: format!(
                    "{} ({})",
                    entity_name(plan.entities[0]),
                    filler_word(plan.filler[0])
                ),
                text: plan.render(),
            }
        })
        .collect();
    let corpus = Corpus::new(passages)?;

    let queries = chains
        .iter()
        .enumerate()
        .map(|(c, (entities, slots))| {
            let first = &plans[slots[0]];
            let mut words: Vec<String> = first
                .filler
                .iter()
                .take(QUERY_TERMS_FROM_FIRST_HOP)
                .map(|&w| filler_word(w))
                .collect();
            words.insert(1, entity_name(entities[0]));
            let gold_ids: BTreeSet<String> = slots
                .iter()
                .map(|&s| format!("syn{:06}", ordinal_of[s]))
                .collect();
            Query {
                id: format!("synq{c:05}"),
                question: format!("which {}?", words.join(" ")),
                gold_ids,
            }
        })
        .collect();

    Ok((corpus, queries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_generic_jsonl_to;

    fn params(n_docs: usize, n_entities: usize, hops: usize, seed: u64) -> SyntheticParams {
        SyntheticParams {
            n_docs,
            n_entities,
            hops,
            seed,
        }
    }

    fn bytes(p: SyntheticParams) -> Vec<u8> {
        let (c, q) = generate_synthetic(p).unwrap();
        let mut buf = Vec::new();
        write_generic_jsonl_to(&mut buf, &c, &q).unwrap();
        buf
    }

    #[test]
    fn deterministic_output() {
        let p = params(10, 6, 2, 7);
        assert_eq!(bytes(p), bytes(p));
        assert_ne!(bytes(p), bytes(params(10, 6, 2, 8)));
    }

    #[test]
    fn gold_sets_have_hops_elements() {
        let (corpus, queries) = generate_synthetic(params(10, 6, 2, 7)).unwrap();
        assert_eq!(corpus.len(), 10);
        assert!(!queries.is_empty());
        for q in &queries {
            assert_eq!(q.gold_ids.len(), 2);
            assert!(q.gold_ids.iter().all(|g| corpus.ordinal(g).is_some()));
        }
    }

    #[test]
    fn entity_names_are_unique_and_two_tokens() {
        let names: BTreeSet<String> = (0..20_000).map(entity_name).collect();
        assert_eq!(names.len(), 20_000);
        for i in [0, 15, 4095, 4096, 19_999] {
            let n = entity_name(i);
            assert_eq!(n.split(' ').count(), 2);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate_synthetic(params(3, 6, 2, 0)).is_err());
        assert!(generate_synthetic(params(10, 2, 2, 0)).is_err());
        assert!(generate_synthetic(params(10, 6, 0, 0)).is_err());
    }
}
