//! Entity-document bipartite graphs.
//!
//! Nodes are numbered documents first (`0..n_docs`) and entities after
//! (`n_docs..n_docs + n_entities`). Every edge joins a document and an
//! entity. Edge weights are
//!
//! ```text
//! w(e, d) = tf(e, d) * ln((N + 1) / (df(e) + 1)) + 1
//! ```
//!
//! The entity -> document rows use `w` directly; document -> entity rows are
//! scaled by `df(e)^-p` to damp hub entities. Both directions are row
//! normalized independently into the transition matrix `forward`.

mod io;

use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::entity::EntityMention;
use crate::error::{Error, Result};
use crate::lexical::tokenize;

pub use io::GRAPH_MAGIC;

/// Compressed sparse rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csr {
    pub(crate) row_ptr: Vec<u64>,
    pub(crate) cols: Vec<u32>,
    pub(crate) vals: Vec<f64>,
}

impl Csr {
    fn with_rows(rows: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        Csr {
            row_ptr,
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    fn close_row(&mut self) {
        self.row_ptr.push(self.cols.len() as u64);
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
        (&self.cols[a..b], &self.vals[a..b])
    }

    #[inline]
    pub fn row_len(&self, i: usize) -> usize {
        (self.row_ptr[i + 1] - self.row_ptr[i]) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GraphParams {
    pub min_entity_df: u32,
    pub max_entity_df_ratio: f64,
    /// Exponent `p` of the `df^-p` multiplier on document -> entity edges.
    pub hub_penalty: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            min_entity_df: 1,
            max_entity_df_ratio: 1.0,
            hub_penalty: 0.5,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hub_penalty >= 0.0 && self.hub_penalty.is_finite()) {
            return Err(Error::param("hub_penalty must be >= 0"));
        }
        if !(self.max_entity_df_ratio > 0.0 && self.max_entity_df_ratio <= 1.0) {
            return Err(Error::param("max_entity_df_ratio must be in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TermGraphParams {
    pub min_df: u32,
    pub max_df_ratio: f64,
    pub hub_penalty: f64,
}

impl Default for TermGraphParams {
    fn default() -> Self {
        TermGraphParams {
            min_df: 3,
            max_df_ratio: 0.1,
            hub_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    n_docs: u32,
    entity_names: Vec<String>,
    entity_index: HashMap<String, u32>,
    /// Number of documents linked to each entity.
    df: Vec<u32>,
    /// Document -> entity multiplier, `df^-p` with df taken at build time.
    hub_scale: Vec<f64>,
    hub_penalty: f64,
    /// Document rows of unnormalized `w(e, d)`, columns are entity ordinals.
    raw: Csr,
    /// Row-stochastic transitions over all nodes.
    forward: Csr,
}

/// TF-IDF edge weight with natural log.
pub fn edge_weight(tf: u32, n_docs: usize, df: u32) -> f64 {
    tf as f64 * ((n_docs as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
}

impl BipartiteGraph {
    /// Builds the entity graph from per-passage mentions (already
    /// normalized and alias-resolved), one list per corpus passage.
    pub fn build(n_docs: usize, mentions: &[Vec<EntityMention>], params: &GraphParams) -> Result<Self> {
        params.validate()?;
        if mentions.len() != n_docs {
            return Err(Error::param(format!(
                "mention lists ({}) do not match passage count ({n_docs})",
                mentions.len()
            )));
        }
        let per_doc = mentions.iter().map(|ms| {
            ms.iter()
                .map(|m| (m.normalized.as_str(), m.count))
                .collect::<Vec<_>>()
        });
        Self::from_counts(
            n_docs,
            per_doc,
            params.min_entity_df,
            params.max_entity_df_ratio,
            params.hub_penalty,
        )
    }

    /// Term-document graph over lowercase word tokens.
    pub fn build_terms(corpus: &Corpus, params: &TermGraphParams) -> Result<Self> {
        if !(params.max_df_ratio > 0.0 && params.max_df_ratio <= 1.0) {
            return Err(Error::param("max_df_ratio must be in (0, 1]"));
        }
        let counts: Vec<Vec<(String, u32)>> = corpus
            .passages()
            .iter()
            .map(|p| {
                let mut order: Vec<(String, u32)> = Vec::new();
                let mut slot: HashMap<String, usize> = HashMap::new();
                for tok in tokenize(&p.text) {
                    match slot.get(&tok) {
                        Some(&i) => order[i].1 += 1,
                        None => {
                            slot.insert(tok.clone(), order.len());
                            order.push((tok, 1));
                        }
                    }
                }
                order
            })
            .collect();
        Self::from_counts(
            corpus.len(),
            counts
                .iter()
                .map(|row| row.iter().map(|(t, c)| (t.as_str(), *c)).collect::<Vec<_>>()),
            params.min_df,
            params.max_df_ratio,
            params.hub_penalty,
        )
    }

    fn from_counts<'a, I>(
        n_docs: usize,
        per_doc: I,
        min_df: u32,
        max_df_ratio: f64,
        hub_penalty: f64,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<(&'a str, u32)>>,
    {
        // First pass: tentative vocabulary in order of first appearance.
        let mut names: Vec<&str> = Vec::new();
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut df: Vec<u32> = Vec::new();
        let mut docs: Vec<Vec<(u32, u32)>> = Vec::with_capacity(n_docs);
        for row in per_doc {
            let mut entries = Vec::with_capacity(row.len());
            for (key, tf) in row {
                if tf == 0 {
                    continue;
                }
                let id = *index.entry(key).or_insert_with(|| {
                    names.push(key);
                    df.push(0);
                    (names.len() - 1) as u32
                });
                df[id as usize] += 1;
                entries.push((id, tf));
            }
            docs.push(entries);
        }

        // Second pass: drop entities outside the df window, renumber.
        let max_df = max_df_ratio * n_docs as f64;
        let mut remap = vec![u32::MAX; names.len()];
        let mut kept_names = Vec::new();
        let mut kept_df = Vec::new();
        for (old, (&name, &d)) in names.iter().zip(&df).enumerate() {
            if d >= min_df && (d as f64) <= max_df {
                remap[old] = kept_names.len() as u32;
                kept_names.push(name.to_string());
                kept_df.push(d);
            }
        }

        let mut raw = Csr::with_rows(n_docs);
        for entries in &mut docs {
            let mut row: Vec<(u32, f64)> = entries
                .iter()
                .filter_map(|&(old, tf)| {
                    let new = remap[old as usize];
                    (new != u32::MAX).then(|| (new, edge_weight(tf, n_docs, kept_df[new as usize])))
                })
                .collect();
            row.sort_unstable_by_key(|&(e, _)| e);
            for (e, w) in row {
                raw.cols.push(e);
                raw.vals.push(w);
            }
            raw.close_row();
        }

        let hub_scale = kept_df
            .iter()
            .map(|&d| (d as f64).powf(-hub_penalty))
            .collect();
        Ok(Self::assemble(n_docs as u32, kept_names, kept_df, hub_scale, hub_penalty, raw))
    }

    /// Builds a graph from explicit `(doc, entity, weight)` edges. Weights
    /// are taken as the raw `w(e, d)`; df is the entity's degree.
    pub fn from_edges(
        n_docs: usize,
        entity_names: Vec<String>,
        edges: &[(u32, u32, f64)],
        hub_penalty: f64,
    ) -> Result<Self> {
        let n_entities = entity_names.len();
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_docs];
        let mut df = vec![0u32; n_entities];
        for &(d, e, w) in edges {
            if d as usize >= n_docs || e as usize >= n_entities {
                return Err(Error::param(format!("edge ({d}, {e}) out of range")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::param("edge weights must be positive"));
            }
            if rows[d as usize].iter().any(|&(x, _)| x == e) {
                return Err(Error::param(format!("duplicate edge ({d}, {e})")));
            }
            rows[d as usize].push((e, w));
            df[e as usize] += 1;
        }
        let mut raw = Csr::with_rows(n_docs);
        for mut row in rows {
            row.sort_unstable_by_key(|&(e, _)| e);
            for (e, w) in row {
                raw.cols.push(e);
                raw.vals.push(w);
            }
            raw.close_row();
        }
        let hub_scale = df
            .iter()
            .map(|&d| if d == 0 { 1.0 } else { (d as f64).powf(-hub_penalty) })
            .collect();
        Ok(Self::assemble(n_docs as u32, entity_names, df, hub_scale, hub_penalty, raw))
    }

    fn assemble(
        n_docs: u32,
        entity_names: Vec<String>,
        df: Vec<u32>,
        hub_scale: Vec<f64>,
        hub_penalty: f64,
        raw: Csr,
    ) -> Self {
        let n_entities = entity_names.len();
        let entity_index = entity_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        let forward = Self::transitions(n_docs as usize, n_entities, &raw, &hub_scale);
        BipartiteGraph {
            n_docs,
            entity_names,
            entity_index,
            df,
            hub_scale,
            hub_penalty,
            raw,
            forward,
        }
    }

    fn transitions(n_docs: usize, n_entities: usize, raw: &Csr, hub_scale: &[f64]) -> Csr {
        let mut fwd = Csr::with_rows(n_docs + n_entities);
        fwd.cols.reserve(2 * raw.nnz());
        fwd.vals.reserve(2 * raw.nnz());
        for d in 0..n_docs {
            let (es, ws) = raw.row(d);
            let total: f64 = es
                .iter()
                .zip(ws)
                .map(|(&e, &w)| w * hub_scale[e as usize])
                .sum();
            for (&e, &w) in es.iter().zip(ws) {
                fwd.cols.push(n_docs as u32 + e);
                fwd.vals.push(w * hub_scale[e as usize] / total);
            }
            fwd.close_row();
        }
        // Entity rows: transpose of raw, documents in ascending order.
        let (offsets, docs, weights) = transpose(raw, n_entities);
        for e in 0..n_entities {
            let (a, b) = (offsets[e], offsets[e + 1]);
            let total: f64 = weights[a..b].iter().sum();
            for i in a..b {
                fwd.cols.push(docs[i]);
                fwd.vals.push(weights[i] / total);
            }
            fwd.close_row();
        }
        fwd
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs as usize
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn node_count(&self) -> usize {
        self.n_docs() + self.n_entities()
    }

    /// Number of raw (undirected) document-entity edges.
    pub fn edge_count(&self) -> usize {
        self.raw.nnz()
    }

    pub fn entity_ordinal(&self, name: &str) -> Option<u32> {
        self.entity_index.get(name).copied()
    }

    pub fn entity_name(&self, ordinal: u32) -> &str {
        &self.entity_names[ordinal as usize]
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn entity_node(&self, ordinal: u32) -> u32 {
        self.n_docs + ordinal
    }

    pub fn df(&self, ordinal: u32) -> u32 {
        self.df[ordinal as usize]
    }

    pub fn hub_penalty(&self) -> f64 {
        self.hub_penalty
    }

    pub fn forward(&self) -> &Csr {
        &self.forward
    }

    pub fn raw(&self) -> &Csr {
        &self.raw
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.forward.row_len(node)
    }

    /// The `ceil(pct * n_entities)` highest-df entities, ties by ordinal.
    pub fn hub_entities(&self, pct: f64) -> Vec<u32> {
        let n_entities = self.n_entities();
        // The small slack keeps e.g. 0.01 * 300 from rounding up to 4.
        let n = ((pct * n_entities as f64) - 1e-9).ceil().max(0.0) as usize;
        let mut by_df: Vec<u32> = (0..n_entities as u32).collect();
        by_df.sort_by(|&a, &b| self.df[b as usize].cmp(&self.df[a as usize]).then(a.cmp(&b)));
        by_df.truncate(n.min(n_entities));
        by_df
    }

    /// Drops the `ceil(hub_top_pct * n_entities)` highest-df entities (ties
    /// by ordinal), then keeps at most `outdegree_cap` strongest edges per
    /// remaining entity (ties by document ordinal) and renormalizes.
    pub fn prune(&self, hub_top_pct: f64, outdegree_cap: Option<usize>) -> Result<Self> {
        if !(0.0..1.0).contains(&hub_top_pct) {
            return Err(Error::param("hub_top_pct must be in [0, 1)"));
        }
        if outdegree_cap == Some(0) {
            return Err(Error::param("outdegree cap must be at least 1"));
        }
        let n_entities = self.n_entities();
        let mut removed = vec![false; n_entities];
        for e in self.hub_entities(hub_top_pct) {
            removed[e as usize] = true;
        }
        let mut remap = vec![u32::MAX; n_entities];
        let mut names = Vec::new();
        let mut hub_scale = Vec::new();
        for e in 0..n_entities {
            if !removed[e] {
                remap[e] = names.len() as u32;
                names.push(self.entity_names[e].clone());
                hub_scale.push(self.hub_scale[e]);
            }
        }

        let n_docs = self.n_docs();
        let (offsets, docs, weights) = transpose(&self.raw, n_entities);
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_docs];
        let mut df = vec![0u32; names.len()];
        for e in 0..n_entities {
            if removed[e] {
                continue;
            }
            let mut edges: Vec<(u32, f64)> = (offsets[e]..offsets[e + 1])
                .map(|i| (docs[i], weights[i]))
                .collect();
            if let Some(cap) = outdegree_cap {
                if edges.len() > cap {
                    edges.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    edges.truncate(cap);
                }
            }
            let new = remap[e];
            df[new as usize] = edges.len() as u32;
            for (d, w) in edges {
                rows[d as usize].push((new, w));
            }
        }
        let mut raw = Csr::with_rows(n_docs);
        for mut row in rows {
            row.sort_unstable_by_key(|&(e, _)| e);
            for (e, w) in row {
                raw.cols.push(e);
                raw.vals.push(w);
            }
            raw.close_row();
        }
        Ok(Self::assemble(self.n_docs, names, df, hub_scale, self.hub_penalty, raw))
    }

    pub fn stats(&self) -> GraphStats {
        let entity_degrees: Vec<usize> = self.df.iter().map(|&d| d as usize).collect();
        let doc_degrees: Vec<usize> = (0..self.n_docs()).map(|d| self.raw.row_len(d)).collect();
        GraphStats {
            nodes: self.node_count(),
            edges: self.edge_count(),
            p95_entity_degree: nearest_rank(&entity_degrees, 95.0),
            p95_doc_degree: nearest_rank(&doc_degrees, 95.0),
        }
    }
}

/// Entity-major view of the document rows: (offsets, docs, weights).
fn transpose(raw: &Csr, n_entities: usize) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
    let mut offsets = vec![0usize; n_entities + 1];
    for &e in &raw.cols {
        offsets[e as usize + 1] += 1;
    }
    for i in 0..n_entities {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut docs = vec![0u32; raw.nnz()];
    let mut weights = vec![0f64; raw.nnz()];
    for d in 0..raw.rows() {
        let (es, ws) = raw.row(d);
        for (&e, &w) in es.iter().zip(ws) {
            let slot = &mut fill[e as usize];
            docs[*slot] = d as u32;
            weights[*slot] = w;
            *slot += 1;
        }
    }
    (offsets, docs, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub p95_entity_degree: usize,
    pub p95_doc_degree: usize,
}

/// Nearest-rank percentile; 0 for an empty slice.
fn nearest_rank(values: &[usize], pct: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}
