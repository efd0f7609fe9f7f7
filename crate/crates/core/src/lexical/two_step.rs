//! BM25-2step: expand the query with the most frequent entity surfaces of
//! the first-stage results, then search again.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bm25_search, Bm25Params, InvertedIndex};
use crate::corpus::Corpus;
use crate::entity::extract_regex;
use crate::ranked::RankedList;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStepParams {
    pub k1_stage: usize,
    pub m_entities: usize,
}

impl Default for TwoStepParams {
    fn default() -> Self {
        TwoStepParams {
            k1_stage: 10,
            m_entities: 3,
        }
    }
}

/// Top `m` surfaces by frequency across `docs`, ties lexicographic.
pub(crate) fn expansion_entities(corpus: &Corpus, docs: impl Iterator<Item = u32>, m: usize) -> Vec<String> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        if let Some(p) = corpus.get(d) {
            for surface in extract_regex(&p.text) {
                *freq.entry(surface).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    // BTreeMap order is lexicographic, so a stable sort keeps that on ties.
    ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    ranked.into_iter().take(m).map(|(s, _)| s.to_string()).collect()
}

pub fn two_step_search(
    index: &InvertedIndex,
    corpus: &Corpus,
    query: &str,
    k: usize,
    params: &TwoStepParams,
    bm25: &Bm25Params,
) -> RankedList {
    let stage1 = bm25_search(index, query, params.k1_stage, bm25);
    if stage1.is_empty() {
        return stage1;
    }
    let entities = expansion_entities(corpus, stage1.docs(), params.m_entities);
    if entities.is_empty() {
        return bm25_search(index, query, k, bm25);
    }
    let expanded = format!("{query} {}", entities.join(" "));
    bm25_search(index, &expanded, k, bm25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;

    fn corpus() -> Corpus {
        let texts = [
            "Paris is where Gustave Eiffel built a tower",
            "Gustave Eiffel also worked in Lyon",
            "Lyon has a river",
            "the river is long",
            "no capitals anywhere here",
        ];
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Passage {
                    id: format!("p{i}"),
                    title: String::new(),
                    text: t.to_string(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_entities_equals_bm25() {
        let c = corpus();
        let idx = InvertedIndex::build(&c);
        let b = Bm25Params::default();
        let p = TwoStepParams {
            k1_stage: 10,
            m_entities: 0,
        };
        assert_eq!(
            two_step_search(&idx, &c, "tower", 10, &p, &b),
            bm25_search(&idx, "tower", 10, &b)
        );
    }

    #[test]
    fn expansion_follows_entities() {
        let c = corpus();
        let idx = InvertedIndex::build(&c);
        let b = Bm25Params::default();
        let p = TwoStepParams {
            k1_stage: 1,
            m_entities: 3,
        };
        let ents = expansion_entities(&c, [0u32].into_iter(), 3);
        assert_eq!(ents, vec!["Gustave Eiffel", "Paris"]);
        let r = two_step_search(&idx, &c, "tower", 10, &p, &b);
        // doc 1 shares only the expansion entity with the query
        assert!(r.rank_of(1).is_some());
        assert!(bm25_search(&idx, "tower", 10, &b).rank_of(1).is_none());
    }

    #[test]
    fn empty_stage_one_and_no_entities() {
        let c = corpus();
        let idx = InvertedIndex::build(&c);
        let b = Bm25Params::default();
        let p = TwoStepParams::default();
        assert!(two_step_search(&idx, &c, "zebra", 10, &p, &b).is_empty());
        assert_eq!(
            two_step_search(&idx, &c, "anywhere", 10, &p, &b),
            bm25_search(&idx, "anywhere", 10, &b)
        );
    }

    #[test]
    fn entities_already_in_query_only_reweight() {
        let c = corpus();
        let idx = InvertedIndex::build(&c);
        let b = Bm25Params::default();
        let p = TwoStepParams {
            k1_stage: 10,
            m_entities: 1,
        };
        // stage 1 for "lyon" hits docs 1 and 2; the top entity is "Lyon" itself
        let r = two_step_search(&idx, &c, "lyon", 10, &p, &b);
        let doubled = bm25_search(&idx, "lyon Lyon", 10, &b);
        assert_eq!(r, doubled);
        assert_eq!(
            r.docs().collect::<Vec<_>>(),
            bm25_search(&idx, "lyon", 10, &b).docs().collect::<Vec<_>>()
        );
    }
}
