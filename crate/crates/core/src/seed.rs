//! Seed distributions for PPR: query entities, retrieved passages, their
//! mixture, and the fallback used when a query yields no seed at all.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entity::{extract_regex, MentionNormalizer};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::lexical::tokenize;
use crate::ppr::SeedVector;
use crate::ranked::RankedList;

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::param(format!(concat!("unknown ", stringify!($ty), " {}"), other))),
                }
            }
        }

        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)+
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Raw,
    Softmax,
    #[default]
    Rank,
}

str_enum!(Weighting { Raw => "raw", Softmax => "softmax", Rank => "rank" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    #[default]
    MassProportional,
    Adaptive,
}

str_enum!(Mixing { MassProportional => "mass_proportional", Adaptive => "adaptive" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    Uniform,
    Bm25Top1,
}

str_enum!(Fallback { Uniform => "uniform", Bm25Top1 => "bm25_top1" });

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub k: usize,
    pub weighting: Weighting,
    pub q: f64,
    pub mixing: Mixing,
    pub fallback: Fallback,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            k: 10,
            weighting: Weighting::Rank,
            q: 0.5,
            mixing: Mixing::MassProportional,
            fallback: Fallback::Uniform,
        }
    }
}

impl SeedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("seed k must be at least 1"));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(Error::param("q must be >= 0"));
        }
        Ok(())
    }
}

/// Seeds on the graph entities mentioned in `question`, each with raw mass
/// `df(e)^-q`. Empty when nothing matches.
pub fn entity_seeds(
    question: &str,
    g: &BipartiteGraph,
    normalizer: &MentionNormalizer<'_>,
    q: f64,
) -> SeedVector {
    df_weighted(g, query_entities(question, g, normalizer), q)
}

/// Graph entities whose normalized key matches a regex mention in `question`.
pub fn query_entities(
    question: &str,
    g: &BipartiteGraph,
    normalizer: &MentionNormalizer<'_>,
) -> BTreeSet<u32> {
    extract_regex(question)
        .into_iter()
        .filter_map(|surface| normalizer.key(surface))
        .filter_map(|key| g.entity_ordinal(&key))
        .collect()
}

/// Term-graph analogue of [`entity_seeds`]: query tokens found in the
/// term vocabulary, weighted by `df^-q`.
pub fn term_seeds(question: &str, g: &BipartiteGraph, q: f64) -> SeedVector {
    let matched: BTreeSet<u32> = tokenize(question)
        .iter()
        .filter_map(|t| g.entity_ordinal(t))
        .collect();
    df_weighted(g, matched, q)
}

fn df_weighted(g: &BipartiteGraph, entities: BTreeSet<u32>, q: f64) -> SeedVector {
    SeedVector::from_masses(
        entities
            .into_iter()
            .map(|e| (g.entity_node(e), (g.df(e) as f64).powf(-q))),
    )
    .expect("df weights are positive")
}

/// Seeds on the top-`k` passages of `ranked`.
pub fn passage_seeds(
    ranked: &RankedList,
    k: usize,
    weighting: Weighting,
    g: &BipartiteGraph,
) -> Result<SeedVector> {
    if k == 0 {
        return Err(Error::param("seed k must be at least 1"));
    }
    let top = &ranked.items[..ranked.len().min(k)];
    if let Some(h) = top.iter().find(|h| h.doc as usize >= g.n_docs()) {
        return Err(Error::param(format!("passage ordinal {} outside graph", h.doc)));
    }
    let masses: Vec<f64> = match weighting {
        Weighting::Rank => (1..=top.len()).map(|r| 1.0 / r as f64).collect(),
        Weighting::Softmax => {
            let max = top.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
            top.iter().map(|h| (h.score - max).exp()).collect()
        }
        Weighting::Raw => {
            let min = top.iter().map(|h| h.score).fold(f64::INFINITY, f64::min);
            let shift = if min < 0.0 { min } else { 0.0 };
            let shifted: Vec<f64> = top.iter().map(|h| h.score - shift).collect();
            if shifted.iter().all(|&m| m == 0.0) {
                vec![1.0; top.len()]
            } else {
                shifted
            }
        }
    };
    SeedVector::from_masses(top.iter().zip(masses).map(|(h, m)| (h.doc, m)))
}

/// Combines entity and passage seeds. If one side is empty the other is
/// returned unchanged.
pub fn mix_seeds(s_e: &SeedVector, s_d: &SeedVector, mode: Mixing) -> Result<SeedVector> {
    match (s_e.is_empty(), s_d.is_empty()) {
        (true, true) => return Err(Error::EmptySeed),
        (true, false) => return Ok(s_d.clone()),
        (false, true) => return Ok(s_e.clone()),
        _ => {}
    }
    let (we, wd) = match mode {
        Mixing::MassProportional => (s_e.raw_l1(), s_d.raw_l1()),
        Mixing::Adaptive => {
            let a = adaptive_alpha(s_e.len(), s_d.len());
            (a, 1.0 - a)
        }
    };
    let combined = s_e
        .entries()
        .iter()
        .map(|&(n, m)| (n, we * m))
        .chain(s_d.entries().iter().map(|&(n, m)| (n, wd * m)));
    SeedVector::from_masses(combined)
}

/// Laplace-smoothed share of the entity partition.
pub fn adaptive_alpha(n_e: usize, n_d: usize) -> f64 {
    (n_e as f64 + 1.0) / ((n_e + n_d) as f64 + 2.0)
}

/// Seed used when the configured seeding is empty. The flag is true when
/// `bm25_top1` had no BM25 hit and degraded to uniform.
pub fn fallback_seed(n_docs: usize, policy: Fallback, bm25: Option<&RankedList>) -> (SeedVector, bool) {
    let uniform = || SeedVector::uniform(0..n_docs as u32);
    match policy {
        Fallback::Uniform => (uniform(), false),
        Fallback::Bm25Top1 => match bm25.and_then(|l| l.items.first()) {
            Some(h) => (SeedVector::uniform([h.doc]), false),
            None => {
                log::debug!("bm25_top1 fallback has no BM25 hit; using uniform");
                (uniform(), true)
            }
        },
    }
}
