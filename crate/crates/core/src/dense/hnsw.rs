//! Hierarchical navigable small world graph over a [`VectorStore`].
//!
//! Distance is `1 - dot` on unit vectors. Levels are drawn from a seeded
//! ChaCha stream with normalization factor `1 / ln M`, so a build is fully
//! determined by the store, the parameters and the seed. Neighbor lists use
//! the diversity heuristic and are topped up with pruned candidates.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, VectorStore};
use crate::error::{Error, Result};
use crate::ranked::RankedList;

const MAX_LEVEL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: 32,
            ef_construction: 200,
            ef_search: 64,
            seed: 42,
        }
    }
}

type Dist = OrderedFloat<f32>;

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    m: usize,
    ef_construction: usize,
    /// `links[node][layer]` for layers `0..=level(node)`.
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    max_level: usize,
}

/// Epoch-stamped visited set reused across searches.
struct Visited {
    stamp: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Visited {
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Marks `i`; true if it was not yet visited in this epoch.
    #[inline]
    fn insert(&mut self, i: u32) -> bool {
        let s = &mut self.stamp[i as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }
}

#[inline]
fn distance(a: &[f32], b: &[f32]) -> Dist {
    OrderedFloat(1.0 - dot(a, b))
}

impl HnswIndex {
    pub fn build(store: &VectorStore, params: &HnswParams) -> Result<Self> {
        if params.m < 2 {
            return Err(Error::param("hnsw M must be at least 2"));
        }
        if params.ef_construction == 0 {
            return Err(Error::param("ef_construction must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let ml = 1.0 / (params.m as f64).ln();
        let mut index = HnswIndex {
            m: params.m,
            ef_construction: params.ef_construction,
            links: Vec::with_capacity(store.len()),
            entry: None,
            max_level: 0,
        };
        let mut visited = Visited::new(store.len());
        for node in 0..store.len() as u32 {
            let u: f64 = rng.random();
            let level = ((-(1.0 - u).ln() * ml).floor() as usize).min(MAX_LEVEL);
            index.insert(store, node, level, &mut visited);
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn entry_point(&self) -> Option<u32> {
        self.entry
    }

    pub fn neighbors(&self, node: u32, layer: usize) -> &[u32] {
        self.links[node as usize]
            .get(layer)
            .map_or(&[], Vec::as_slice)
    }

    pub fn level(&self, node: u32) -> usize {
        self.links[node as usize].len() - 1
    }

    fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    fn insert(&mut self, store: &VectorStore, node: u32, level: usize, visited: &mut Visited) {
        self.links.push(vec![Vec::new(); level + 1]);
        let Some(entry) = self.entry else {
            self.entry = Some(node);
            self.max_level = level;
            return;
        };
        let q = store.row(node);
        let mut ep = (distance(q, store.row(entry)), entry);
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.greedy(store, q, ep, layer);
        }
        let mut eps = vec![ep];
        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(store, q, &eps, self.ef_construction, layer, visited);
            let chosen = select_neighbors(store, &found, self.m);
            self.links[node as usize][layer] = chosen.clone();
            let cap = self.max_degree(layer);
            for &n in &chosen {
                let list = &mut self.links[n as usize][layer];
                list.push(node);
                if list.len() > cap {
                    let base = store.row(n);
                    let mut cands: Vec<(Dist, u32)> = list
                        .iter()
                        .map(|&c| (distance(base, store.row(c)), c))
                        .collect();
                    cands.sort_unstable();
                    self.links[n as usize][layer] = select_neighbors(store, &cands, cap);
                }
            }
            eps = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(node);
        }
    }

    /// Single-step greedy walk toward `q` on one layer.
    fn greedy(&self, store: &VectorStore, q: &[f32], mut best: (Dist, u32), layer: usize) -> (Dist, u32) {
        loop {
            let mut improved = false;
            for &n in self.neighbors(best.1, layer) {
                let d = distance(q, store.row(n));
                if (d, n) < best {
                    best = (d, n);
                    improved = true;
                }
            }
            if !improved {
                return best;
            }
        }
    }

    /// Beam search of width `ef`; result sorted by ascending distance.
    fn search_layer(
        &self,
        store: &VectorStore,
        q: &[f32],
        entry: &[(Dist, u32)],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<(Dist, u32)> {
        visited.reset();
        let mut candidates: BinaryHeap<Reverse<(Dist, u32)>> = BinaryHeap::new();
        let mut results: BinaryHeap<(Dist, u32)> = BinaryHeap::new();
        for &e in entry {
            if visited.insert(e.1) {
                candidates.push(Reverse(e));
                results.push(e);
            }
        }
        while results.len() > ef {
            results.pop();
        }
        while let Some(Reverse(c)) = candidates.pop() {
            let worst = results.peek().copied().expect("results are never empty here");
            if c.0 > worst.0 && results.len() >= ef {
                break;
            }
            for &n in self.neighbors(c.1, layer) {
                if !visited.insert(n) {
                    continue;
                }
                let d = distance(q, store.row(n));
                if results.len() < ef || (d, n) < *results.peek().unwrap() {
                    candidates.push(Reverse((d, n)));
                    results.push((d, n));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        results.into_sorted_vec()
    }

    /// Approximate cosine top-`k`; `ef_search` must be at least `k`.
    pub fn search(&self, store: &VectorStore, query: &[f32], k: usize, ef_search: usize) -> Result<RankedList> {
        if ef_search < k {
            return Err(Error::param(format!("ef_search ({ef_search}) must be >= k ({k})")));
        }
        if store.len() != self.len() {
            return Err(Error::param("store does not match the index"));
        }
        let q = store.prepare_query(query)?;
        let Some(entry) = self.entry else {
            return Ok(RankedList::default());
        };
        let mut ep = (distance(&q, store.row(entry)), entry);
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy(store, &q, ep, layer);
        }
        let mut visited = Visited::new(self.len());
        let found = self.search_layer(store, &q, &[ep], ef_search.max(1), 0, &mut visited);
        Ok(RankedList::top_k(
            found.into_iter().map(|(_, n)| (n, dot(store.row(n), &q) as f64)),
            k,
        ))
    }
}

/// Diversity heuristic: keep a candidate only if it is closer to the base
/// than to every neighbor already kept; then fill up with the skipped ones.
/// `candidates` must be sorted by ascending distance to the base.
fn select_neighbors(store: &VectorStore, candidates: &[(Dist, u32)], m: usize) -> Vec<u32> {
    let mut kept: Vec<u32> = Vec::with_capacity(m);
    let mut skipped: Vec<u32> = Vec::new();
    for &(d, c) in candidates {
        if kept.len() >= m {
            break;
        }
        let row = store.row(c);
        if kept.iter().all(|&k| distance(row, store.row(k)) > d) {
            kept.push(c);
        } else {
            skipped.push(c);
        }
    }
    for c in skipped {
        if kept.len() >= m {
            break;
        }
        kept.push(c);
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::exact_search;
    use crate::dense::tests::random_store;

    fn params(m: usize, efc: usize) -> HnswParams {
        HnswParams {
            m,
            ef_construction: efc,
            ef_search: 64,
            seed: 5,
        }
    }

    #[test]
    fn deterministic_build() {
        let store = random_store(300, 16, 9);
        let a = HnswIndex::build(&store, &params(8, 50)).unwrap();
        let b = HnswIndex::build(&store, &params(8, 50)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_vector() {
        let store = random_store(1, 4, 1);
        let idx = HnswIndex::build(&store, &params(4, 10)).unwrap();
        let r = idx.search(&store, store.row(0), 1, 1).unwrap();
        assert_eq!(r.docs().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn degree_bounds_and_connectivity() {
        let store = random_store(500, 8, 4);
        let idx = HnswIndex::build(&store, &params(6, 40)).unwrap();
        for n in 0..idx.len() as u32 {
            for layer in 0..=idx.level(n) {
                assert!(idx.neighbors(n, layer).len() <= idx.max_degree(layer));
            }
        }
        let mut seen = vec![false; idx.len()];
        let mut stack = vec![idx.entry_point().unwrap()];
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n as usize], true) {
                continue;
            }
            stack.extend(idx.neighbors(n, 0));
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn exhaustive_beam_equals_exact() {
        let store = random_store(200, 12, 6);
        let idx = HnswIndex::build(&store, &params(4, 20)).unwrap();
        for i in 0..20 {
            let q = store.row(i * 7).iter().map(|x| x + 0.1).collect::<Vec<_>>();
            let approx = idx.search(&store, &q, 10, store.len()).unwrap();
            let exact = exact_search(&store, &q, 10).unwrap();
            assert_eq!(approx, exact);
        }
    }

    #[test]
    fn self_query_and_ef_check() {
        let store = random_store(400, 16, 8);
        let idx = HnswIndex::build(&store, &params(8, 64)).unwrap();
        for i in [0u32, 57, 399] {
            let r = idx.search(&store, store.row(i), 1, 32).unwrap();
            assert_eq!(r.items[0].doc, i);
        }
        assert!(idx.search(&store, store.row(0), 10, 5).is_err());
        assert!(HnswIndex::build(&store, &params(1, 10)).is_err());
    }
}
