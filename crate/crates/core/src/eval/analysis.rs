//! Diagnostics relating query entities and hub pruning to gold passages.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Query};
use crate::entity::MentionNormalizer;
use crate::graph::BipartiteGraph;
use crate::seed::query_entities;

use super::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubCoverage {
    pub hub_top_pct: f64,
    pub hubs: usize,
    /// Share of (query, gold passage) pairs whose title key is a hub, in %.
    pub gold_removed_pct: f64,
    /// Share of queries with at least one such gold passage, in %.
    pub queries_affected_pct: f64,
}

/// How many gold titles the top-`pct` hub entities would remove.
pub fn hub_pruning_coverage(
    g: &BipartiteGraph,
    corpus: &Corpus,
    queries: &[Query],
    normalizer: &MentionNormalizer<'_>,
    pct: f64,
) -> HubCoverage {
    let hubs: HashSet<u32> = g.hub_entities(pct).into_iter().collect();
    let (mut pairs, mut removed, mut scored, mut affected) = (0usize, 0usize, 0usize, 0usize);
    for q in queries.iter().filter(|q| !q.gold_ids.is_empty()) {
        scored += 1;
        let mut hit = false;
        for gold in &q.gold_ids {
            pairs += 1;
            let is_hub = gold_entity(gold, g, corpus, normalizer).is_some_and(|e| hubs.contains(&e));
            if is_hub {
                removed += 1;
                hit = true;
            }
        }
        affected += usize::from(hit);
    }
    let pct_of = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    HubCoverage {
        hub_top_pct: pct,
        hubs: hubs.len(),
        gold_removed_pct: pct_of(removed, pairs),
        queries_affected_pct: pct_of(affected, scored),
    }
}

fn gold_entity(
    gold_id: &str,
    g: &BipartiteGraph,
    corpus: &Corpus,
    normalizer: &MentionNormalizer<'_>,
) -> Option<u32> {
    let passage = corpus.get(corpus.ordinal(gold_id)?)?;
    g.entity_ordinal(&normalizer.key(&passage.title)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NerBucket {
    NoEntity,
    EntityNoGold,
    EntityGold,
}

impl NerBucket {
    pub fn as_str(&self) -> &'static str {
        match self {
            NerBucket::NoEntity => "no_entity",
            NerBucket::EntityNoGold => "entity_no_gold",
            NerBucket::EntityGold => "entity_gold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerBucketRow {
    pub bucket: NerBucket,
    pub method: String,
    pub pct_queries: f64,
    pub recall_at_10: f64,
    pub mrr: f64,
}

/// Assigns each query to a bucket by whether any of its matched graph
/// entities is the title key of one of its gold passages.
pub fn assign_ner_buckets(
    g: &BipartiteGraph,
    corpus: &Corpus,
    queries: &[Query],
    normalizer: &MentionNormalizer<'_>,
) -> BTreeMap<String, NerBucket> {
    queries
        .iter()
        .filter(|q| !q.gold_ids.is_empty())
        .map(|q| {
            let ents = query_entities(&q.question, g, normalizer);
            let bucket = if ents.is_empty() {
                NerBucket::NoEntity
            } else {
                let gold: BTreeSet<u32> = q
                    .gold_ids
                    .iter()
                    .filter_map(|id| gold_entity(id, g, corpus, normalizer))
                    .collect();
                if ents.intersection(&gold).next().is_some() {
                    NerBucket::EntityGold
                } else {
                    NerBucket::EntityNoGold
                }
            };
            (q.id.clone(), bucket)
        })
        .collect()
}

/// Per-bucket query share, R@10 and MRR for each report.
pub fn ner_proxy_buckets(
    buckets: &BTreeMap<String, NerBucket>,
    reports: &[&EvalReport],
) -> Vec<NerBucketRow> {
    let total = buckets.len().max(1) as f64;
    let mut rows = Vec::new();
    for report in reports {
        for bucket in [NerBucket::NoEntity, NerBucket::EntityNoGold, NerBucket::EntityGold] {
            let members: Vec<_> = report
                .per_query
                .iter()
                .filter(|m| buckets.get(&m.query_id) == Some(&bucket))
                .collect();
            let n = members.len();
            let mean = |f: &dyn Fn(&super::QueryMetrics) -> f64| {
                if n == 0 {
                    0.0
                } else {
                    members.iter().map(|m| f(m)).sum::<f64>() / n as f64
                }
            };
            rows.push(NerBucketRow {
                bucket,
                method: report.method.clone(),
                pct_queries: 100.0 * buckets.values().filter(|b| **b == bucket).count() as f64 / total,
                recall_at_10: mean(&|m| m.recall_at_10),
                mrr: mean(&|m| m.reciprocal_rank),
            });
        }
    }
    rows
}
