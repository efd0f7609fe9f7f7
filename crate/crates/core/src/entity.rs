//! Entity mentions: regex extraction, surface normalization and the
//! title-alias map built from corpus titles alone.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::Error;

/// One-to-four capitalized words, e.g. "The Eiffel Tower".
const MENTION_PATTERN: &str = r"\b[A-Z][a-z]+(\s+[A-Z][a-z]+){0,3}\b";

fn mention_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(MENTION_PATTERN).expect("static pattern"))
}

fn parenthetical_suffix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s*\([^()]*\)\s*$").expect("static pattern"))
}

/// Surface spans in document order. Matches never overlap; a run of more
/// than four capitalized words is split into a 4-word span and a remainder.
pub fn extract_regex(text: &str) -> Vec<&str> {
    mention_regex().find_iter(text).map(|m| m.as_str()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Lowercase, drop every character that is not alphanumeric or space.
    /// Characters with no lowercase form are dropped too.
    #[default]
    Simple,
    Lower,
    None,
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "simple" => Ok(NormMode::Simple),
            "lower" => Ok(NormMode::Lower),
            "none" => Ok(NormMode::None),
            other => Err(Error::param(format!("unknown normalization mode {other}"))),
        }
    }
}

impl NormMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormMode::Simple => "simple",
            NormMode::Lower => "lower",
            NormMode::None => "none",
        }
    }
}

pub fn normalize_entity(surface: &str, mode: NormMode) -> String {
    match mode {
        NormMode::None => surface.to_string(),
        NormMode::Lower => surface.to_lowercase(),
        NormMode::Simple => {
            let mut out = String::with_capacity(surface.len());
            let mut pending_space = false;
            for c in surface.chars().flat_map(char::to_lowercase) {
                if c.is_whitespace() {
                    pending_space = !out.is_empty();
                } else if c.is_alphanumeric() && !c.is_uppercase() {
                    if pending_space {
                        out.push(' ');
                        pending_space = false;
                    }
                    out.push(c);
                }
            }
            out
        }
    }
}

/// Maps normalized mentions to a canonical title form. Only aliases
/// produced by exactly one distinct title are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasMap {
    pub mode: NormMode,
    pub entries: BTreeMap<String, String>,
}

impl AliasMap {
    pub fn build(corpus: &Corpus, mode: NormMode) -> Self {
        Self::from_titles(corpus.passages().iter().map(|p| p.title.as_str()), mode)
    }

    pub fn from_titles<'a, I>(titles: I, mode: NormMode) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let titles: BTreeSet<&str> = titles.into_iter().collect();
        // alias -> (canonical, number of distinct titles producing it)
        let mut producers: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for title in titles {
            let canonical = normalize_entity(title, mode);
            if canonical.is_empty() {
                continue;
            }
            let base = parenthetical_suffix().replace(title, "");
            let mut aliases = BTreeSet::from([canonical.clone()]);
            let base_norm = normalize_entity(&base, mode);
            if !base_norm.is_empty() {
                aliases.insert(base_norm);
            }
            for alias in aliases {
                producers
                    .entry(alias)
                    .and_modify(|(_, n)| *n += 1)
                    .or_insert((canonical.clone(), 1));
            }
        }
        let entries = producers
            .into_iter()
            .filter(|(alias, (canonical, n))| *n == 1 && alias != canonical)
            .map(|(alias, (canonical, _))| (alias, canonical))
            .collect();
        AliasMap { mode, entries }
    }

    pub fn resolve<'a>(&'a self, mention: &'a str) -> &'a str {
        self.entries.get(mention).map_or(mention, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub normalized: String,
    pub passage_ordinal: u32,
    /// Occurrences of `normalized` in the passage.
    pub count: u32,
}

/// Turns surface strings into normalized, alias-resolved, counted mentions.
#[derive(Debug, Clone)]
pub struct MentionNormalizer<'a> {
    pub mode: NormMode,
    pub min_len: usize,
    pub aliases: Option<&'a AliasMap>,
}

impl MentionNormalizer<'_> {
    pub fn key(&self, surface: &str) -> Option<String> {
        let norm = normalize_entity(surface, self.mode);
        if norm.chars().count() < self.min_len {
            return None;
        }
        Some(match self.aliases {
            Some(map) => map.resolve(&norm).to_string(),
            None => norm,
        })
    }

    /// Aggregates surfaces by key in order of first appearance.
    pub fn mentions<'s, I>(&self, ordinal: u32, surfaces: I) -> Vec<EntityMention>
    where
        I: IntoIterator<Item = &'s str>,
    {
        let mut out: Vec<EntityMention> = Vec::new();
        let mut slot: HashMap<String, usize> = HashMap::new();
        for surface in surfaces {
            let Some(key) = self.key(surface) else {
                continue;
            };
            match slot.get(&key) {
                Some(&i) => out[i].count += 1,
                None => {
                    slot.insert(key.clone(), out.len());
                    out.push(EntityMention {
                        surface: surface.to_string(),
                        normalized: key,
                        passage_ordinal: ordinal,
                        count: 1,
                    });
                }
            }
        }
        out
    }

    /// Regex mentions for every passage, in corpus order.
    pub fn extract_corpus(&self, corpus: &Corpus) -> Vec<Vec<EntityMention>> {
        use rayon::prelude::*;
        corpus
            .passages()
            .par_iter()
            .enumerate()
            .map(|(i, p)| self.mentions(i as u32, extract_regex(&p.text)))
            .collect()
    }

    /// Mentions from an external per-passage entity table. Passages absent
    /// from the table get no mentions.
    pub fn from_external(
        &self,
        corpus: &Corpus,
        table: &HashMap<String, Vec<String>>,
    ) -> Vec<Vec<EntityMention>> {
        corpus
            .passages()
            .iter()
            .enumerate()
            .map(|(i, p)| match table.get(&p.id) {
                Some(list) => self.mentions(i as u32, list.iter().map(String::as_str)),
                None => Vec::new(),
            })
            .collect()
    }
}
