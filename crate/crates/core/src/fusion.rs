//! Rank fusion, RRF + PPR score fusion, and reranking from an external
//! score file (stand-in for an out-of-process cross-encoder).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{for_each_json_line, parse_line, Corpus};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::ppr::PprScores;
use crate::ranked::{Hit, RankedList};

pub const DEFAULT_K_RRF: f64 = 60.0;

/// `score(d) = Σ 1 / (k_rrf + rank)` over the top-`depth` of each list.
/// Ties go to the better rank in the first list (absent ranks last), then
/// to the lower ordinal.
pub fn rrf_fuse(lists: &[&RankedList], k_rrf: f64, depth: usize) -> Result<RankedList> {
    if lists.is_empty() {
        return Err(Error::param("rrf needs at least one list"));
    }
    if !(k_rrf >= 0.0 && k_rrf.is_finite()) {
        return Err(Error::param("k_rrf must be >= 0"));
    }
    let mut score: HashMap<u32, f64> = HashMap::new();
    let mut first_rank: HashMap<u32, usize> = HashMap::new();
    for (li, list) in lists.iter().enumerate() {
        for (i, h) in list.items.iter().take(depth).enumerate() {
            *score.entry(h.doc).or_default() += 1.0 / (k_rrf + (i + 1) as f64);
            if li == 0 {
                first_rank.insert(h.doc, i + 1);
            }
        }
    }
    let mut items: Vec<Hit> = score
        .into_iter()
        .map(|(doc, score)| Hit { doc, score })
        .collect();
    let rank = |d: u32| first_rank.get(&d).copied().unwrap_or(usize::MAX);
    items.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| rank(a.doc).cmp(&rank(b.doc)))
            .then(a.doc.cmp(&b.doc))
    });
    Ok(RankedList::new(items))
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// `w * rrf_norm + (1 - w) * ppr_norm` over the RRF items plus every
/// document with positive PPR mass. Each side is min-max normalized over
/// those candidates (absent = 0); a constant side contributes 0.5. Ties
/// follow the heavier component's own order, then ordinal.
pub fn score_fuse(rrf: &RankedList, g: &BipartiteGraph, ppr: &PprScores, w: f64) -> Result<RankedList> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::param("fusion weight must be in [0, 1]"));
    }
    let doc_scores = &ppr.scores[..g.n_docs()];
    let mut position: HashMap<u32, usize> = HashMap::new();
    let mut candidates: Vec<u32> = Vec::new();
    for (i, h) in rrf.items.iter().enumerate() {
        position.insert(h.doc, i);
        candidates.push(h.doc);
    }
    let rrf_score: HashMap<u32, f64> = rrf.items.iter().map(|h| (h.doc, h.score)).collect();
    for (d, &s) in doc_scores.iter().enumerate() {
        if s > 0.0 && !position.contains_key(&(d as u32)) {
            candidates.push(d as u32);
        }
    }
    let r: Vec<f64> = candidates.iter().map(|d| rrf_score.get(d).copied().unwrap_or(0.0)).collect();
    let p: Vec<f64> = candidates.iter().map(|&d| doc_scores[d as usize]).collect();
    let (rn, pn) = (min_max(&r), min_max(&p));

    struct Row {
        doc: u32,
        combined: f64,
        position: usize,
        ppr: f64,
    }
    let mut rows: Vec<Row> = candidates
        .iter()
        .enumerate()
        .map(|(i, &doc)| Row {
            doc,
            combined: w * rn[i] + (1.0 - w) * pn[i],
            position: position.get(&doc).copied().unwrap_or(usize::MAX),
            ppr: p[i],
        })
        .collect();
    let rrf_first = w >= 0.5;
    rows.sort_by(|a, b| {
        let by_rrf = || a.position.cmp(&b.position);
        let by_ppr = || b.ppr.total_cmp(&a.ppr);
        let tie: Ordering = if rrf_first {
            by_rrf().then_with(by_ppr)
        } else {
            by_ppr().then_with(by_rrf)
        };
        b.combined
            .total_cmp(&a.combined)
            .then(tie)
            .then(a.doc.cmp(&b.doc))
    });
    Ok(RankedList::new(
        rows.into_iter()
            .map(|r| Hit {
                doc: r.doc,
                score: r.combined,
            })
            .collect(),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLine {
    query_id: String,
    passage_id: String,
    score: f64,
}

/// External relevance scores keyed by `(query id, passage id)`.
#[derive(Debug, Clone, Default)]
pub struct ExternalScores {
    by_query: HashMap<String, HashMap<String, f64>>,
}

impl ExternalScores {
    pub fn load(path: &Path) -> Result<Self> {
        let mut out = ExternalScores::default();
        for_each_json_line(path, |line_no, line| {
            let rec: ScoreLine = parse_line(path, line_no, line)?;
            if !rec.score.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    record: line_no,
                    message: "score must be finite".into(),
                });
            }
            out.insert(rec.query_id, rec.passage_id, rec.score);
            Ok(())
        })?;
        Ok(out)
    }

    pub fn insert(&mut self, query_id: String, passage_id: String, score: f64) {
        self.by_query.entry(query_id).or_default().insert(passage_id, score);
    }

    pub fn get(&self, query_id: &str, passage_id: &str) -> Option<f64> {
        self.by_query.get(query_id)?.get(passage_id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.by_query.is_empty()
    }
}

/// Reorders the first `top_n` candidates by external score (descending,
/// stable). Unscored candidates follow the scored ones in their original
/// order; everything past `top_n` is untouched. When the order changes,
/// scores are replaced by descending rank scores `n - i`.
pub fn external_rerank(
    candidates: &RankedList,
    query_id: &str,
    corpus: &Corpus,
    scores: &ExternalScores,
    top_n: usize,
) -> RankedList {
    let head = candidates.len().min(top_n);
    let mut scored: Vec<(f64, Hit)> = Vec::new();
    let mut unscored: Vec<Hit> = Vec::new();
    for h in &candidates.items[..head] {
        match scores.get(query_id, corpus.id(h.doc)) {
            Some(s) => scored.push((s, *h)),
            None => unscored.push(*h),
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let order: Vec<Hit> = scored
        .into_iter()
        .map(|(_, h)| h)
        .chain(unscored)
        .chain(candidates.items[head..].iter().copied())
        .collect();
    if order.iter().zip(&candidates.items).all(|(a, b)| a.doc == b.doc) {
        return candidates.clone();
    }
    let n = order.len();
    let mut out = RankedList::new(
        order
            .into_iter()
            .enumerate()
            .map(|(i, h)| Hit {
                doc: h.doc,
                score: (n - i) as f64,
            })
            .collect(),
    );
    out.timings = candidates.timings;
    out
}
