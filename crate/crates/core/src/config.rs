//! Run configuration: one JSON document, optional dataset default bundles,
//! enhancement variants, and dotted-key overrides for parameter grids.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::corpus::{DatasetFormat, SyntheticParams};
use crate::dense::HnswParams;
use crate::entity::NormMode;
use crate::error::{Error, Result};
use crate::graph::{GraphParams, TermGraphParams};
use crate::lexical::{Bm25Params, Rm3Params, TwoStepParams};
use crate::ppr::PprParams;
use crate::seed::{Fallback, Mixing, SeedConfig, Weighting};

/// Every runnable pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Method {
    #[serde(rename = "bm25")]
    Bm25,
    #[serde(rename = "rm3")]
    Rm3,
    #[serde(rename = "bm25_2step")]
    Bm25TwoStep,
    #[serde(rename = "dense")]
    Dense,
    #[serde(rename = "rrf")]
    Rrf,
    #[serde(rename = "graph")]
    Graph,
    #[default]
    #[serde(rename = "graph_hybrid")]
    GraphHybrid,
    #[serde(rename = "graph_dense")]
    GraphDense,
    #[serde(rename = "graph_rrf")]
    GraphRrf,
    #[serde(rename = "rrf_ppr_fusion")]
    RrfPprFusion,
    #[serde(rename = "tfidf_graph")]
    TfidfGraph,
    #[serde(rename = "bm25_rerank")]
    Bm25Rerank,
    #[serde(rename = "rrf_rerank")]
    RrfRerank,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Bm25,
        Method::Rm3,
        Method::Bm25TwoStep,
        Method::Dense,
        Method::Rrf,
        Method::Graph,
        Method::GraphHybrid,
        Method::GraphDense,
        Method::GraphRrf,
        Method::RrfPprFusion,
        Method::TfidfGraph,
        Method::Bm25Rerank,
        Method::RrfRerank,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bm25 => "bm25",
            Method::Rm3 => "rm3",
            Method::Bm25TwoStep => "bm25_2step",
            Method::Dense => "dense",
            Method::Rrf => "rrf",
            Method::Graph => "graph",
            Method::GraphHybrid => "graph_hybrid",
            Method::GraphDense => "graph_dense",
            Method::GraphRrf => "graph_rrf",
            Method::RrfPprFusion => "rrf_ppr_fusion",
            Method::TfidfGraph => "tfidf_graph",
            Method::Bm25Rerank => "bm25_rerank",
            Method::RrfRerank => "rrf_rerank",
        }
    }

    /// Runs PPR over the entity graph.
    pub fn uses_entity_graph(&self) -> bool {
        matches!(
            self,
            Method::Graph | Method::GraphHybrid | Method::GraphDense | Method::GraphRrf | Method::RrfPprFusion
        )
    }

    pub fn uses_dense(&self) -> bool {
        matches!(
            self,
            Method::Dense
                | Method::Rrf
                | Method::GraphDense
                | Method::GraphRrf
                | Method::RrfPprFusion
                | Method::RrfRerank
        )
    }

    pub fn uses_rerank_scores(&self) -> bool {
        matches!(self, Method::Bm25Rerank | Method::RrfRerank)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s}")))
    }
}

/// Enhancement variant labels for the entity graph pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Variant {
    #[default]
    #[serde(rename = "base")]
    Base,
    #[serde(rename = "+EL")]
    El,
    #[serde(rename = "+PRUNE")]
    Prune,
    #[serde(rename = "+MIX")]
    Mix,
    #[serde(rename = "+ALL")]
    All,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Base, Variant::El, Variant::Prune, Variant::Mix, Variant::All];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::El => "+EL",
            Variant::Prune => "+PRUNE",
            Variant::Mix => "+MIX",
            Variant::All => "+ALL",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s}")))
    }
}

/// Hub share removed by the +PRUNE variant.
pub const PRUNE_HUB_PCT: f64 = 0.01;
/// Per-entity out-degree cap applied by the +PRUNE variant.
pub const PRUNE_OUTDEGREE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub format: Option<DatasetFormat>,
    pub path: Option<PathBuf>,
    /// Separate generic-JSONL query file resolved against the corpus.
    pub queries: Option<PathBuf>,
    /// Generates the corpus instead of loading one.
    pub synthetic: Option<SyntheticParams>,
    /// Optional `{"id", "entities"}` lines used when `ner.mode` is external.
    pub entities: Option<PathBuf>,
    pub passage_vectors: Option<PathBuf>,
    pub passage_ids: Option<PathBuf>,
    pub query_vectors: Option<PathBuf>,
    pub query_ids: Option<PathBuf>,
    /// External reranker scores.
    pub rerank_scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NerMode {
    #[default]
    Regex,
    External,
}

impl NerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NerMode::Regex => "regex",
            NerMode::External => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NerConfig {
    pub mode: NerMode,
    pub normalization: NormMode,
    pub min_entity_len: usize,
    /// Resolve mentions through the corpus-title alias map.
    pub aliases: bool,
}

impl Default for NerConfig {
    fn default() -> Self {
        NerConfig {
            mode: NerMode::Regex,
            normalization: NormMode::Simple,
            min_entity_len: 2,
            aliases: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub min_entity_df: u32,
    pub max_entity_df_ratio: f64,
    pub hub_penalty: f64,
    /// Fraction of highest-df entities removed; 0 disables.
    pub prune_hub_pct: f64,
    pub outdegree_cap: Option<usize>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        let g = GraphParams::default();
        GraphConfig {
            min_entity_df: g.min_entity_df,
            max_entity_df_ratio: g.max_entity_df_ratio,
            hub_penalty: g.hub_penalty,
            prune_hub_pct: 0.0,
            outdegree_cap: None,
        }
    }
}

impl GraphConfig {
    pub fn params(&self) -> GraphParams {
        GraphParams {
            min_entity_df: self.min_entity_df,
            max_entity_df_ratio: self.max_entity_df_ratio,
            hub_penalty: self.hub_penalty,
        }
    }

    pub fn prunes(&self) -> bool {
        self.prune_hub_pct > 0.0 || self.outdegree_cap.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    /// Seed passages for BM25 and RRF seeding.
    pub k: usize,
    /// Seed passages for dense seeding.
    pub k_dense: usize,
    pub weighting: Weighting,
    pub q: f64,
    pub mixing: Mixing,
    pub fallback: Fallback,
}

impl Default for SeedSection {
    fn default() -> Self {
        let s = SeedConfig::default();
        SeedSection {
            k: s.k,
            k_dense: 5,
            weighting: s.weighting,
            q: s.q,
            mixing: s.mixing,
            fallback: s.fallback,
        }
    }
}

impl SeedSection {
    pub fn for_method(&self, method: Method) -> SeedConfig {
        SeedConfig {
            k: if method == Method::GraphDense { self.k_dense } else { self.k },
            weighting: self.weighting,
            q: self.q,
            mixing: self.mixing,
            fallback: self.fallback,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenseConfig {
    /// Brute-force search instead of HNSW.
    pub exact: bool,
    pub hnsw: HnswParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub rrf_k: f64,
    pub depth: usize,
    /// Weight of the RRF component in RRF+PPR score fusion.
    pub ppr_weight: f64,
    pub rerank_top_n: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            rrf_k: crate::fusion::DEFAULT_K_RRF,
            depth: 100,
            ppr_weight: 0.5,
            rerank_top_n: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub queries_limit: Option<usize>,
    /// Length of every returned ranking.
    pub retrieve_depth: usize,
    /// Query subset size used by `ablate`.
    pub subset_size: usize,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            queries_limit: None,
            retrieve_depth: 100,
            subset_size: 500,
            bootstrap_resamples: 10_000,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Entities per document in the generated corpora.
    pub entity_ratio: f64,
    pub hops: usize,
    /// Queries timed per size.
    pub queries: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![1000, 2000, 4000, 8000],
            trials: 3,
            entity_ratio: 1.5,
            hops: 2,
            queries: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Name of the default bundle this config was merged over.
    pub defaults: Option<String>,
    pub method: Method,
    pub variant: Variant,
    pub out_dir: PathBuf,
    pub rng_seed: u64,
    pub dataset: DatasetConfig,
    pub ner: NerConfig,
    pub graph: GraphConfig,
    pub term_graph: TermGraphParams,
    pub ppr: PprParams,
    pub seed: SeedSection,
    pub bm25: Bm25Params,
    pub rm3: Rm3Params,
    pub two_step: TwoStepParams,
    pub dense: DenseConfig,
    pub fusion: FusionConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            defaults: None,
            method: Method::default(),
            variant: Variant::default(),
            out_dir: PathBuf::from("out"),
            rng_seed: 42,
            dataset: DatasetConfig::default(),
            ner: NerConfig::default(),
            graph: GraphConfig::default(),
            term_graph: TermGraphParams::default(),
            ppr: PprParams::default(),
            seed: SeedSection::default(),
            bm25: Bm25Params::default(),
            rm3: Rm3Params::default(),
            two_step: TwoStepParams::default(),
            dense: DenseConfig::default(),
            fusion: FusionConfig::default(),
            eval: EvalConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

/// Tuned settings for HotpotQA-style and 2Wiki-style data.
pub fn default_bundle(name: &str) -> Result<Value> {
    match name {
        "hotpot-defaults" => Ok(json!({
            "ppr": {"mode": "push"},
            "seed": {"k": 10, "k_dense": 5, "q": 0.5},
            "ner": {"normalization": "simple"},
        })),
        "2wiki-defaults" => Ok(json!({
            "ppr": {"mode": "power"},
            "seed": {"k": 5, "k_dense": 3, "q": 1.0},
            "ner": {"normalization": "lower"},
        })),
        other => Err(Error::Config(format!(
            "unknown defaults bundle {other} (expected hotpot-defaults or 2wiki-defaults)"
        ))),
    }
}

/// Recursively overlays `top` on `base`; objects merge, everything else
/// replaces.
pub fn deep_merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets `a.b.c` in a JSON object, creating intermediate objects.
pub fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut cur = root;
    for part in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key}: {part} is not an object")))?;
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override {key}: parent is not an object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses a config document, merging it over its `defaults` bundle.
    pub fn from_value(user: Value) -> Result<Self> {
        if !user.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let mut merged = match user.get("defaults").and_then(Value::as_str) {
            Some(name) => default_bundle(name)?,
            None => Value::Object(Map::new()),
        };
        deep_merge(&mut merged, user);
        let cfg: RunConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Applies dotted-key overrides and re-validates.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, Value>) -> Result<Self> {
        let mut v = self.to_value();
        for (k, val) in overrides {
            set_dotted(&mut v, k, val.clone())?;
        }
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy with the variant's toggles applied.
    pub fn effective(&self) -> RunConfig {
        let mut c = self.clone();
        let (el, prune, mix) = match self.variant {
            Variant::Base => (false, false, false),
            Variant::El => (true, false, false),
            Variant::Prune => (false, true, false),
            Variant::Mix => (false, false, true),
            Variant::All => (true, true, true),
        };
        if el {
            c.ner.aliases = true;
        }
        if prune {
            c.graph.prune_hub_pct = PRUNE_HUB_PCT;
            c.graph.outdegree_cap = Some(PRUNE_OUTDEGREE_CAP);
        }
        if mix {
            c.seed.mixing = Mixing::Adaptive;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.graph.params().validate().map_err(wrap)?;
        if !(0.0..1.0).contains(&self.graph.prune_hub_pct) {
            return Err(Error::Config("graph.prune_hub_pct must be in [0, 1)".into()));
        }
        if self.graph.outdegree_cap == Some(0) {
            return Err(Error::Config("graph.outdegree_cap must be ≥ 1".into()));
        }
        if !(self.term_graph.max_df_ratio > 0.0 && self.term_graph.max_df_ratio <= 1.0) {
            return Err(Error::Config("term_graph.max_df_ratio must be in (0, 1]".into()));
        }
        self.ppr.validate().map_err(wrap)?;
        self.seed.for_method(Method::GraphDense).validate().map_err(wrap)?;
        self.seed.for_method(self.method).validate().map_err(wrap)?;
        self.bm25.validate().map_err(wrap)?;
        self.rm3.validate().map_err(wrap)?;
        if self.ner.min_entity_len == 0 {
            return Err(Error::Config("ner.min_entity_len must be ≥ 1".into()));
        }
        if self.dense.hnsw.m < 2 || self.dense.hnsw.ef_construction == 0 || self.dense.hnsw.ef_search == 0 {
            return Err(Error::Config("dense.hnsw needs m ≥ 2 and positive ef values".into()));
        }
        if !(self.fusion.rrf_k >= 0.0) || self.fusion.depth == 0 {
            return Err(Error::Config("fusion needs rrf_k ≥ 0 and depth ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fusion.ppr_weight) {
            return Err(Error::Config("fusion.ppr_weight must be in [0, 1]".into()));
        }
        if self.eval.retrieve_depth == 0 || self.eval.subset_size == 0 {
            return Err(Error::Config("eval.retrieve_depth and eval.subset_size must be ≥ 1".into()));
        }
        if !(self.eval.confidence > 0.0 && self.eval.confidence < 1.0) || self.eval.bootstrap_resamples == 0 {
            return Err(Error::Config("eval needs confidence in (0,1) and resamples ≥ 1".into()));
        }
        let d = &self.dataset;
        if d.synthetic.is_none() && d.path.is_none() {
            return Err(Error::Config("dataset needs either path or synthetic".into()));
        }
        if d.synthetic.is_some() && d.path.is_some() {
            return Err(Error::Config("dataset.path and dataset.synthetic are exclusive".into()));
        }
        if d.passage_vectors.is_some() != d.passage_ids.is_some()
            || d.query_vectors.is_some() != d.query_ids.is_some()
        {
            return Err(Error::Config("vector files and their ids files must be given together".into()));
        }
        if self.ner.mode == NerMode::External && d.entities.is_none() {
            return Err(Error::Config("ner.mode external needs dataset.entities".into()));
        }
        Ok(())
    }

    /// Checks that the files the configured method needs are configured and
    /// present, before any query runs.
    pub fn check_method_inputs(&self) -> Result<()> {
        let d = &self.dataset;
        let need = |p: &Option<PathBuf>, what: &str| -> Result<()> {
            match p {
                None => Err(Error::Config(format!("method {} needs dataset.{what}", self.method))),
                Some(path) if !path.exists() => Err(Error::Config(format!(
                    "method {} needs dataset.{what}, but {} does not exist",
                    self.method,
                    path.display()
                ))),
                Some(_) => Ok(()),
            }
        };
        if self.method.uses_dense() {
            need(&d.passage_vectors, "passage_vectors")?;
            need(&d.passage_ids, "passage_ids")?;
            need(&d.query_vectors, "query_vectors")?;
            need(&d.query_ids, "query_ids")?;
        }
        if self.method.uses_rerank_scores() {
            need(&d.rerank_scores, "rerank_scores")?;
        }
        if let Some(p) = &d.path {
            if !p.exists() {
                return Err(Error::Config(format!("dataset.path {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        sha256_json(&self.to_value())
    }

    /// Fingerprint of the settings that determine built artifacts.
    pub fn index_hash(&self) -> String {
        let e = self.effective();
        sha256_json(&json!({
            "dataset": e.dataset,
            "ner": e.ner,
            "graph": e.graph,
            "term_graph": e.term_graph,
        }))
    }
}

fn sha256_json(v: &Value) -> String {
    // serde_json maps are ordered by key, so the text is canonical.
    let text = serde_json::to_string(v).expect("json serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Expands a grid of dotted keys to value lists into its cartesian
/// product, keys in sorted order, first key varying slowest.
pub fn expand_grid(grid: &BTreeMap<String, Vec<Value>>) -> Result<Vec<BTreeMap<String, Value>>> {
    let mut cells = vec![BTreeMap::new()];
    for (key, values) in grid {
        if values.is_empty() {
            return Err(Error::Config(format!("grid key {key} has no values")));
        }
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.insert(key.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppr::PprMode;

    fn synthetic_cfg(extra: Value) -> Result<RunConfig> {
        let mut v = json!({"dataset": {"synthetic": {"n_docs": 20, "n_entities": 10, "hops": 2, "seed": 1}}});
        deep_merge(&mut v, extra);
        RunConfig::from_value(v)
    }

    #[test]
    fn defaults_match_tuned_settings() {
        let c = synthetic_cfg(json!({})).unwrap();
        assert_eq!(c.ppr.alpha, 0.15);
        assert_eq!(c.ppr.max_iter, 5);
        assert_eq!(c.graph.hub_penalty, 0.5);
        assert_eq!(c.ner.min_entity_len, 2);
        assert_eq!(c.seed.weighting, Weighting::Rank);
        assert_eq!(c.term_graph.min_df, 3);
        assert_eq!(c.term_graph.max_df_ratio, 0.1);
        assert_eq!((c.dense.hnsw.m, c.dense.hnsw.ef_construction, c.dense.hnsw.ef_search), (32, 200, 64));
        assert_eq!(c.fusion.rrf_k, 60.0);
        assert_eq!(c.fusion.rerank_top_n, 100);
        assert_eq!(c.eval.subset_size, 500);
    }

    #[test]
    fn bundles_apply_under_user_values() {
        let h = synthetic_cfg(json!({"defaults": "hotpot-defaults"})).unwrap();
        assert_eq!(h.ppr.mode, PprMode::Push);
        assert_eq!((h.seed.k, h.seed.k_dense, h.seed.q), (10, 5, 0.5));
        assert_eq!(h.ner.normalization, NormMode::Simple);

        let w = synthetic_cfg(json!({"defaults": "2wiki-defaults", "seed": {"k": 7}})).unwrap();
        assert_eq!(w.ppr.mode, PprMode::Power);
        assert_eq!((w.seed.k, w.seed.k_dense, w.seed.q), (7, 3, 1.0));
        assert_eq!(w.ner.normalization, NormMode::Lower);
        assert_eq!(w.seed.for_method(Method::GraphDense).k, 3);

        assert!(synthetic_cfg(json!({"defaults": "nope"})).is_err());
    }

    #[test]
    fn unknown_keys_and_methods_rejected() {
        let e = synthetic_cfg(json!({"ppr": {"alpah": 0.2}})).unwrap_err().to_string();
        assert!(e.contains("alpah"), "{e}");
        assert!(synthetic_cfg(json!({"bogus": 1})).is_err());
        assert!(synthetic_cfg(json!({"method": "graph_magic"})).is_err());
        assert!(synthetic_cfg(json!({"ppr": {"alpha": 1.5}})).is_err());
        assert!(synthetic_cfg(json!({"seed": {"k": 0}})).is_err());
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            let c = synthetic_cfg(json!({"method": m.as_str()})).unwrap();
            assert_eq!(c.method, m);
        }
    }

    #[test]
    fn variants_toggle_enhancements() {
        let c = synthetic_cfg(json!({"variant": "+ALL"})).unwrap().effective();
        assert!(c.ner.aliases);
        assert_eq!(c.graph.prune_hub_pct, 0.01);
        assert_eq!(c.graph.outdegree_cap, Some(64));
        assert_eq!(c.seed.mixing, Mixing::Adaptive);
        let p = synthetic_cfg(json!({"variant": "+PRUNE"})).unwrap().effective();
        assert!(!p.ner.aliases && p.graph.prunes());
        assert_eq!(p.seed.mixing, Mixing::MassProportional);
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn overrides_and_hashes() {
        let c = synthetic_cfg(json!({})).unwrap();
        let mut o = BTreeMap::new();
        o.insert("ppr.alpha".to_string(), json!(0.3));
        o.insert("seed.weighting".to_string(), json!("softmax"));
        let d = c.with_overrides(&o).unwrap();
        assert_eq!(d.ppr.alpha, 0.3);
        assert_eq!(d.seed.weighting, Weighting::Softmax);
        assert_ne!(c.config_hash(), d.config_hash());
        assert_eq!(c.index_hash(), d.index_hash());
        assert_eq!(c.config_hash(), c.clone().config_hash());

        o.insert("graph.hub_penalty".to_string(), json!(1.0));
        assert_ne!(c.index_hash(), c.with_overrides(&o).unwrap().index_hash());
        o.insert("ppr.nope".to_string(), json!(1));
        assert!(c.with_overrides(&o).is_err());
    }

    #[test]
    fn grid_expansion_order() {
        let mut g = BTreeMap::new();
        g.insert("seed.k".to_string(), vec![json!(5), json!(10)]);
        g.insert("ppr.alpha".to_string(), vec![json!(0.1), json!(0.2), json!(0.3)]);
        let cells = expand_grid(&g).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0]["ppr.alpha"], json!(0.1));
        assert_eq!(cells[0]["seed.k"], json!(5));
        assert_eq!(cells[1]["seed.k"], json!(10));
        assert_eq!(expand_grid(&BTreeMap::new()).unwrap().len(), 1);
    }

    #[test]
    fn dataset_source_required() {
        assert!(RunConfig::from_value(json!({})).is_err());
        let missing = synthetic_cfg(json!({"method": "dense"})).unwrap();
        assert!(missing.check_method_inputs().is_err());
        assert!(synthetic_cfg(json!({"method": "bm25"})).unwrap().check_method_inputs().is_ok());
    }
}
