//! Tokenization, the inverted index and Okapi BM25, plus RM3 feedback and
//! two-step entity expansion on top of it.

mod rm3;
mod two_step;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ranked::RankedList;

pub use rm3::{rm3_search, Rm3Params};
pub use two_step::{two_step_search, TwoStepParams};

/// Lowercase alphanumeric runs. No stemming and no stopword list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::param("bm25 k1 must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::param("bm25 b must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Term postings over corpus ordinals. Terms are numbered in order of first
/// appearance, so the serialized form is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    terms: Vec<String>,
    /// Per term, `(doc, tf)` with docs ascending.
    postings: Vec<Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    #[serde(skip)]
    term_ids: HashMap<String, u32>,
    /// Per doc, `(term, tf)`; rebuilt from postings on load.
    #[serde(skip)]
    doc_terms: Vec<Vec<(u32, u32)>>,
    #[serde(skip)]
    avgdl: f64,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus) -> Self {
        Self::from_texts(corpus.passages().iter().map(|p| p.text.as_str()))
    }

    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let mut terms: Vec<String> = Vec::new();
        let mut term_ids: HashMap<String, u32> = HashMap::new();
        let mut postings: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut doc_lengths = Vec::new();
        for (d, text) in texts.into_iter().enumerate() {
            let tokens = tokenize(text);
            doc_lengths.push(tokens.len() as u32);
            for tok in tokens {
                let id = match term_ids.get(&tok) {
                    Some(&id) => id,
                    None => {
                        let id = terms.len() as u32;
                        term_ids.insert(tok.clone(), id);
                        terms.push(tok);
                        postings.push(Vec::new());
                        id
                    }
                };
                let list = &mut postings[id as usize];
                match list.last_mut() {
                    Some((doc, tf)) if *doc == d as u32 => *tf += 1,
                    _ => list.push((d as u32, 1)),
                }
            }
        }
        let mut index = InvertedIndex {
            terms,
            postings,
            doc_lengths,
            term_ids,
            doc_terms: Vec::new(),
            avgdl: 0.0,
        };
        index.derive();
        index
    }

    /// Recomputes the lookup tables that are not serialized.
    fn derive(&mut self) {
        self.term_ids = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let mut doc_terms = vec![Vec::new(); self.doc_lengths.len()];
        for (t, list) in self.postings.iter().enumerate() {
            for &(d, tf) in list {
                doc_terms[d as usize].push((t as u32, tf));
            }
        }
        self.doc_terms = doc_terms;
        let n = self.doc_lengths.len();
        self.avgdl = if n == 0 {
            0.0
        } else {
            self.doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / n as f64
        };
    }

    pub fn n_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_length(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn df(&self, term: u32) -> usize {
        self.postings[term as usize].len()
    }

    pub fn postings(&self, term: u32) -> &[(u32, u32)] {
        &self.postings[term as usize]
    }

    pub fn doc_terms(&self, doc: u32) -> &[(u32, u32)] {
        &self.doc_terms[doc as usize]
    }

    pub fn idf(&self, term: u32) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 contribution of one occurrence of `term` to every doc that
    /// contains it, scaled by `weight`, added into `acc`.
    fn accumulate(&self, term: u32, weight: f64, params: &Bm25Params, acc: &mut Accumulator) {
        let idf = self.idf(term);
        let Bm25Params { k1, b } = *params;
        for &(d, tf) in self.postings(term) {
            let tf = tf as f64;
            let dl = self.doc_lengths[d as usize] as f64;
            let norm = if self.avgdl > 0.0 { dl / self.avgdl } else { 0.0 };
            let s = idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
            acc.add(d, weight * s);
        }
    }

    /// Scores docs for weighted term ids and returns the top `k` matched.
    pub fn search_weighted(&self, weights: &[(u32, f64)], k: usize, params: &Bm25Params) -> RankedList {
        let mut acc = Accumulator::new(self.n_docs());
        for &(t, w) in weights {
            self.accumulate(t, w, params, &mut acc);
        }
        RankedList::top_k(acc.into_scores(), k)
    }

    /// Query tokens present in the vocabulary, with multiplicity.
    pub fn query_term_counts(&self, query: &str) -> Vec<(u32, f64)> {
        let mut counts: Vec<(u32, f64)> = Vec::new();
        for tok in tokenize(query) {
            if let Some(id) = self.term_id(&tok) {
                match counts.iter_mut().find(|(t, _)| *t == id) {
                    Some((_, c)) => *c += 1.0,
                    None => counts.push((id, 1.0)),
                }
            }
        }
        counts
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)
            .map_err(|e| Error::format(path, e.to_string()))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut index: InvertedIndex = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::format(path, e.to_string()))?;
        if index.postings.len() != index.terms.len() {
            return Err(Error::format(path, "postings and terms differ in length"));
        }
        let n = index.doc_lengths.len() as u32;
        if index.postings.iter().flatten().any(|&(d, _)| d >= n) {
            return Err(Error::format(path, "posting refers to an unknown document"));
        }
        index.derive();
        Ok(index)
    }
}

/// Dense score buffer that remembers which docs were touched.
struct Accumulator {
    scores: Vec<f64>,
    touched: Vec<u32>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            scores: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    #[inline]
    fn add(&mut self, doc: u32, s: f64) {
        let slot = &mut self.scores[doc as usize];
        if *slot == 0.0 {
            self.touched.push(doc);
        }
        *slot += s;
    }

    fn into_scores(self) -> impl Iterator<Item = (u32, f64)> {
        let Accumulator { scores, mut touched } = self;
        touched.sort_unstable();
        touched.dedup();
        touched.into_iter().map(move |d| (d, scores[d as usize]))
    }
}

/// Okapi BM25 top-`k`. Documents sharing no term with the query are omitted.
pub fn bm25_search(index: &InvertedIndex, query: &str, k: usize, params: &Bm25Params) -> RankedList {
    index.search_weighted(&index.query_term_counts(query), k, params)
}
