//! RM3 pseudo-relevance feedback.
//!
//! The relevance model is estimated from the top `fb_docs` BM25 results:
//! `RM(t) ∝ Σ_d P(t|d) · w(d)` with `P(t|d) = tf / dl` and `w(d)` the
//! softmax of the feedback scores. The `fb_terms` heaviest terms (ties by
//! term string) are renormalized and interpolated with the maximum
//! likelihood query model; the result reweights a second BM25 pass.

use serde::{Deserialize, Serialize};

use super::{Bm25Params, InvertedIndex};
use crate::error::{Error, Result};
use crate::ranked::RankedList;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Weight of the original query model.
    pub lambda: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Rm3Params {
            fb_docs: 10,
            fb_terms: 10,
            lambda: 0.5,
        }
    }
}

impl Rm3Params {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param("rm3 lambda must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Interpolated term weights `(term id, weight)`, zero weights dropped.
pub(crate) fn expanded_weights(
    index: &InvertedIndex,
    query: &str,
    params: &Rm3Params,
    bm25: &Bm25Params,
) -> Vec<(u32, f64)> {
    let n_query_tokens = super::tokenize(query).len();
    if n_query_tokens == 0 {
        return Vec::new();
    }
    let counts = index.query_term_counts(query);
    let mut weights: Vec<(u32, f64)> = counts
        .iter()
        .map(|&(t, c)| (t, params.lambda * c / n_query_tokens as f64))
        .collect();

    let feedback = index.search_weighted(&counts, params.fb_docs, bm25);
    if params.fb_terms > 0 && !feedback.is_empty() && params.lambda < 1.0 {
        let max = feedback.items[0].score;
        let doc_w: Vec<f64> = feedback.items.iter().map(|h| (h.score - max).exp()).collect();
        let z: f64 = doc_w.iter().sum();

        let mut rm: Vec<f64> = vec![0.0; index.vocab_size()];
        let mut seen = vec![false; index.vocab_size()];
        let mut touched: Vec<u32> = Vec::new();
        for (h, w) in feedback.items.iter().zip(&doc_w) {
            let dl = index.doc_length(h.doc) as f64;
            for &(t, tf) in index.doc_terms(h.doc) {
                if !std::mem::replace(&mut seen[t as usize], true) {
                    touched.push(t);
                }
                rm[t as usize] += tf as f64 / dl * (w / z);
            }
        }
        touched.sort_by(|&a, &b| {
            rm[b as usize]
                .total_cmp(&rm[a as usize])
                .then_with(|| index.term(a).cmp(index.term(b)))
        });
        touched.truncate(params.fb_terms);
        touched.retain(|&t| rm[t as usize] > 0.0);
        let total: f64 = touched.iter().map(|&t| rm[t as usize]).sum();
        for t in touched {
            let w = (1.0 - params.lambda) * rm[t as usize] / total;
            match weights.iter_mut().find(|(id, _)| *id == t) {
                Some((_, x)) => *x += w,
                None => weights.push((t, w)),
            }
        }
    }
    weights.retain(|&(_, w)| w > 0.0);
    weights
}

pub fn rm3_search(
    index: &InvertedIndex,
    query: &str,
    k: usize,
    params: &Rm3Params,
    bm25: &Bm25Params,
) -> RankedList {
    index.search_weighted(&expanded_weights(index, query, params, bm25), k, bm25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexical::bm25_search;

    fn corpus() -> InvertedIndex {
        InvertedIndex::from_texts([
            "paris is the capital of france",
            "the eiffel tower stands in paris",
            "gustave eiffel designed the tower",
            "london is the capital of england",
            "the thames flows through london",
            "france borders spain",
        ])
    }

    fn order(l: &RankedList) -> Vec<u32> {
        l.docs().collect()
    }

    #[test]
    fn lambda_one_is_bm25() {
        let idx = corpus();
        let p = Rm3Params {
            lambda: 1.0,
            ..Default::default()
        };
        let b = Bm25Params::default();
        for q in ["paris tower", "capital", "eiffel eiffel london"] {
            assert_eq!(order(&rm3_search(&idx, q, 10, &p, &b)), order(&bm25_search(&idx, q, 10, &b)));
        }
    }

    #[test]
    fn zero_feedback_terms_is_bm25() {
        let idx = corpus();
        let p = Rm3Params {
            fb_terms: 0,
            ..Default::default()
        };
        let b = Bm25Params::default();
        assert_eq!(
            order(&rm3_search(&idx, "paris tower", 10, &p, &b)),
            order(&bm25_search(&idx, "paris tower", 10, &b))
        );
    }

    #[test]
    fn expansion_reaches_new_documents() {
        let idx = corpus();
        let b = Bm25Params::default();
        let p = Rm3Params {
            fb_docs: 1,
            fb_terms: 20,
            lambda: 0.5,
        };
        let plain = bm25_search(&idx, "eiffel designed", 10, &b);
        let expanded = rm3_search(&idx, "eiffel designed", 10, &p, &b);
        assert!(expanded.len() > plain.len());
        let weights = expanded_weights(&idx, "eiffel designed", &p, &b);
        let total: f64 = weights.iter().map(|w| w.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_query_gives_empty() {
        let idx = corpus();
        assert!(rm3_search(&idx, "", 10, &Rm3Params::default(), &Bm25Params::default()).is_empty());
    }
}
