//! Ranked result lists shared by every retriever.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// One retrieved passage, identified by its corpus ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc: u32,
    pub score: f64,
}

/// Wall-clock attribution for one query, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub seed_seconds: f64,
    pub traversal_seconds: f64,
    pub total_seconds: f64,
}

/// Ordered passages, best first. Ids are unique within a list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedList {
    pub items: Vec<Hit>,
    pub timings: Timings,
}

/// Descending score, ascending ordinal.
pub(crate) fn by_score_then_doc(a: &Hit, b: &Hit) -> Ordering {
    b.score.total_cmp(&a.score).then(a.doc.cmp(&b.doc))
}

impl RankedList {
    pub fn new(items: Vec<Hit>) -> Self {
        RankedList {
            items,
            timings: Timings::default(),
        }
    }

    /// Top-`k` of arbitrary `(doc, score)` pairs, ties broken by ordinal.
    /// Duplicate docs are not merged; callers pass each doc once.
    pub fn top_k<I>(scores: I, k: usize) -> Self
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut items: Vec<Hit> = scores
            .into_iter()
            .map(|(doc, score)| Hit { doc, score })
            .collect();
        if k == 0 {
            return RankedList::default();
        }
        if items.len() > k {
            items.select_nth_unstable_by(k - 1, by_score_then_doc);
            items.truncate(k);
        }
        items.sort_unstable_by(by_score_then_doc);
        RankedList::new(items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn docs(&self) -> impl Iterator<Item = u32> + '_ {
        self.items.iter().map(|h| h.doc)
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.items.truncate(k);
        self
    }

    /// 1-based rank of `doc`, if present.
    pub fn rank_of(&self, doc: u32) -> Option<usize> {
        self.items.iter().position(|h| h.doc == doc).map(|p| p + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_orders_by_score_then_ordinal() {
        let list = RankedList::top_k(vec![(3, 0.5), (1, 0.5), (2, 0.9), (0, 0.1)], 3);
        assert_eq!(list.docs().collect::<Vec<_>>(), vec![2, 1, 3]);
    }

    #[test]
    fn top_k_zero_is_empty() {
        assert!(RankedList::top_k(vec![(0, 1.0)], 0).is_empty());
    }
}
