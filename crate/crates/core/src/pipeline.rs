//! Builds the retrieval artifacts for a run configuration and executes any
//! configured method per query, with seed/traversal timing and fallback
//! accounting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_file, Method, NerMode, RunConfig};
use crate::corpus::{
    generate_synthetic, load_corpus, load_external_entities, load_queries_jsonl, Corpus, DatasetFormat, LoadReport,
    Query,
};
use crate::dense::{exact_search, HnswIndex, VectorStore};
use crate::entity::{AliasMap, EntityMention, MentionNormalizer};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, EvalReport, Run, RunEntry};
use crate::fusion::{external_rerank, rrf_fuse, score_fuse, ExternalScores};
use crate::graph::BipartiteGraph;
use crate::lexical::{bm25_search, rm3_search, two_step_search, InvertedIndex};
use crate::ppr::{ppr, rank_documents, SeedVector};
use crate::ranked::{RankedList, Timings};
use crate::seed::{entity_seeds, fallback_seed, mix_seeds, passage_seeds, term_seeds, Fallback};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRAPH_FILE: &str = "graph.sprig";
pub const TERM_GRAPH_FILE: &str = "term_graph.sprig";
pub const LEXICAL_FILE: &str = "lexical.json";

/// Wall-clock seconds spent building each artifact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildTimings {
    pub load_seconds: f64,
    pub entity_seconds: f64,
    pub graph_seconds: f64,
    pub term_graph_seconds: f64,
    pub lexical_seconds: f64,
    pub dense_seconds: f64,
}

/// Persisted description of an index directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub index_hash: String,
    pub config_hash: String,
    /// File name → SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
    /// Attached vector files, by path, with their SHA-256.
    pub vectors: BTreeMap<String, String>,
    pub passages: usize,
    pub queries: usize,
    pub build: BuildTimings,
}

/// Everything a run needs, built once and shared read-only across queries.
pub struct Artifacts {
    pub corpus: Corpus,
    pub queries: Vec<Query>,
    pub load_report: LoadReport,
    pub aliases: Option<AliasMap>,
    pub graph: Option<BipartiteGraph>,
    pub term_graph: Option<BipartiteGraph>,
    pub lexical: InvertedIndex,
    pub passage_vectors: Option<VectorStore>,
    pub hnsw: Option<HnswIndex>,
    pub query_vectors: Option<VectorStore>,
    pub rerank_scores: Option<ExternalScores>,
    pub build: BuildTimings,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed().as_secs_f64();
    out
}

/// Loads or generates the corpus and queries named by the config.
pub fn load_dataset(cfg: &RunConfig) -> Result<(Corpus, Vec<Query>, LoadReport)> {
    let d = &cfg.dataset;
    let (corpus, mut queries, mut report) = match (&d.synthetic, &d.path) {
        (Some(params), _) => {
            let (c, q) = generate_synthetic(*params)?;
            (c, q, LoadReport::default())
        }
        (None, Some(path)) => {
            let format = d.format.unwrap_or(DatasetFormat::GenericJsonl);
            let ds = load_corpus(path, format)?;
            (ds.corpus, ds.queries, ds.report)
        }
        (None, None) => return Err(Error::Config("dataset needs either path or synthetic".into())),
    };
    if let Some(qpath) = &d.queries {
        let (q, r) = load_queries_jsonl(qpath, &corpus)?;
        queries = q;
        report.missing_support_titles += r.missing_support_titles;
        report.empty_gold_queries = r.empty_gold_queries;
    }
    if let Some(limit) = cfg.eval.queries_limit {
        queries.truncate(limit);
    }
    Ok((corpus, queries, report))
}

impl Artifacts {
    /// Builds every artifact the configured method needs. Call with the
    /// variant-applied config from [`RunConfig::effective`].
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let mut load_seconds = 0.0;
        let (corpus, queries, load_report) =
            timed(&mut load_seconds, || load_dataset(cfg)).map_err(|e| e.in_module("corpus_store"))?;
        let mut arts = Self::from_parts(cfg, corpus, queries)?;
        arts.load_report = load_report;
        arts.build.load_seconds = load_seconds;
        Ok(arts)
    }

    /// Builds artifacts over an in-memory corpus.
    pub fn from_parts(cfg: &RunConfig, corpus: Corpus, queries: Vec<Query>) -> Result<Self> {
        let mut build = BuildTimings::default();
        let load_report = LoadReport::default();
        let aliases = cfg.ner.aliases.then(|| AliasMap::build(&corpus, cfg.ner.normalization));
        let lexical = timed(&mut build.lexical_seconds, || Ok(InvertedIndex::build(&corpus)))?;
        let mut arts = Artifacts {
            corpus,
            queries,
            load_report,
            aliases,
            graph: None,
            term_graph: None,
            lexical,
            passage_vectors: None,
            hnsw: None,
            query_vectors: None,
            rerank_scores: None,
            build,
        };
        arts.graph = Some(arts.build_entity_graph(cfg)?);
        if cfg.method == Method::TfidfGraph {
            let mut secs = 0.0;
            let tg = timed(&mut secs, || BipartiteGraph::build_terms(&arts.corpus, &cfg.term_graph))
                .map_err(|e| e.in_module("graph_builder"))?;
            arts.build.term_graph_seconds = secs;
            arts.term_graph = Some(tg);
        }
        arts.attach_external(cfg)?;
        Ok(arts)
    }

    /// Reuses the graph and lexical files under `dir` when its manifest
    /// matches this config; otherwise builds in memory.
    pub fn load_or_build(cfg: &RunConfig, dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: Option<Manifest> = fs::read_to_string(&manifest_path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        let usable = manifest.as_ref().is_some_and(|m| {
            m.index_hash == cfg.index_hash()
                && m.artifacts.contains_key(GRAPH_FILE)
                && m.artifacts.contains_key(LEXICAL_FILE)
                && (cfg.method != Method::TfidfGraph || m.artifacts.contains_key(TERM_GRAPH_FILE))
        });
        if !usable {
            log::info!("no matching index in {}; building in memory", dir.display());
            return Self::build(cfg);
        }
        let mut build = BuildTimings::default();
        let (corpus, queries, load_report) =
            timed(&mut build.load_seconds, || load_dataset(cfg)).map_err(|e| e.in_module("corpus_store"))?;
        let graph = BipartiteGraph::load(&dir.join(GRAPH_FILE)).map_err(|e| e.in_module("graph_builder"))?;
        let lexical = InvertedIndex::load_json(&dir.join(LEXICAL_FILE)).map_err(|e| e.in_module("lexical_retrieval"))?;
        if graph.n_docs() != corpus.len() || lexical.n_docs() != corpus.len() {
            return Err(Error::Misaligned(format!(
                "index in {} does not match the corpus size {}",
                dir.display(),
                corpus.len()
            )));
        }
        let term_graph = if cfg.method == Method::TfidfGraph {
            Some(BipartiteGraph::load(&dir.join(TERM_GRAPH_FILE)).map_err(|e| e.in_module("graph_builder"))?)
        } else {
            None
        };
        let aliases = cfg.ner.aliases.then(|| AliasMap::build(&corpus, cfg.ner.normalization));
        let mut arts = Artifacts {
            corpus,
            queries,
            load_report,
            aliases,
            graph: Some(graph),
            term_graph,
            lexical,
            passage_vectors: None,
            hnsw: None,
            query_vectors: None,
            rerank_scores: None,
            build,
        };
        arts.attach_external(cfg)?;
        Ok(arts)
    }

    pub fn normalizer(&self, cfg: &RunConfig) -> MentionNormalizer<'_> {
        MentionNormalizer {
            mode: cfg.ner.normalization,
            min_len: cfg.ner.min_entity_len,
            aliases: self.aliases.as_ref(),
        }
    }

    fn mentions(&self, cfg: &RunConfig) -> Result<Vec<Vec<EntityMention>>> {
        let norm = self.normalizer(cfg);
        match cfg.ner.mode {
            NerMode::Regex => Ok(norm.extract_corpus(&self.corpus)),
            NerMode::External => {
                let path = cfg
                    .dataset
                    .entities
                    .as_ref()
                    .ok_or_else(|| Error::Config("ner.mode external needs dataset.entities".into()))?;
                let table = load_external_entities(path)?;
                Ok(norm.from_external(&self.corpus, &table))
            }
        }
    }

    fn build_entity_graph(&mut self, cfg: &RunConfig) -> Result<BipartiteGraph> {
        let mut secs = 0.0;
        let mentions = timed(&mut secs, || self.mentions(cfg)).map_err(|e| e.in_module("entity_extraction"))?;
        self.build.entity_seconds = secs;
        let mut secs = 0.0;
        let g = timed(&mut secs, || {
            let g = BipartiteGraph::build(self.corpus.len(), &mentions, &cfg.graph.params())?;
            if cfg.graph.prunes() {
                g.prune(cfg.graph.prune_hub_pct, cfg.graph.outdegree_cap)
            } else {
                Ok(g)
            }
        })
        .map_err(|e| e.in_module("graph_builder"))?;
        self.build.graph_seconds = secs;
        Ok(g)
    }

    fn attach_external(&mut self, cfg: &RunConfig) -> Result<()> {
        let d = &cfg.dataset;
        if cfg.method.uses_dense() {
            cfg.check_method_inputs()?;
        }
        if let (Some(v), Some(ids)) = (&d.passage_vectors, &d.passage_ids) {
            let mut secs = 0.0;
            let (store, hnsw) = timed(&mut secs, || {
                let store = VectorStore::load(v, ids)?.aligned_to(&self.corpus)?;
                let hnsw = if cfg.dense.exact || !cfg.method.uses_dense() {
                    None
                } else {
                    Some(HnswIndex::build(&store, &cfg.dense.hnsw)?)
                };
                Ok((store, hnsw))
            })
            .map_err(|e| e.in_module("dense_retrieval"))?;
            self.build.dense_seconds = secs;
            self.passage_vectors = Some(store);
            self.hnsw = hnsw;
        }
        if let (Some(v), Some(ids)) = (&d.query_vectors, &d.query_ids) {
            let store = VectorStore::load(v, ids).map_err(|e| e.in_module("dense_retrieval"))?;
            if let Some(p) = &self.passage_vectors {
                if p.dim() != store.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: p.dim(),
                        actual: store.dim(),
                    }
                    .in_module("dense_retrieval"));
                }
            }
            if cfg.method.uses_dense() {
                if let Some(q) = self.queries.iter().find(|q| store.row_by_id(&q.id).is_none()) {
                    return Err(Error::Misaligned(format!("query {} has no vector", q.id)).in_module("dense_retrieval"));
                }
            }
            self.query_vectors = Some(store);
        }
        if cfg.method.uses_rerank_scores() {
            cfg.check_method_inputs()?;
        }
        if let Some(path) = &d.rerank_scores {
            self.rerank_scores = Some(ExternalScores::load(path).map_err(|e| e.in_module("fusion_rerank"))?);
        }
        Ok(())
    }

    /// Writes graph and lexical files plus a manifest with fingerprints.
    pub fn save(&self, cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<PathBuf> = Vec::new();
        if let Some(g) = &self.graph {
            let p = dir.join(GRAPH_FILE);
            g.save(&p)?;
            files.push(p);
        }
        if let Some(g) = &self.term_graph {
            let p = dir.join(TERM_GRAPH_FILE);
            g.save(&p)?;
            files.push(p);
        }
        let p = dir.join(LEXICAL_FILE);
        self.lexical.save_json(&p)?;
        files.push(p);

        let mut artifacts = BTreeMap::new();
        for f in &files {
            let name = f.file_name().expect("artifact file name").to_string_lossy().into_owned();
            artifacts.insert(name, sha256_file(f)?);
        }
        let mut vectors = BTreeMap::new();
        let d = &cfg.dataset;
        for p in [&d.passage_vectors, &d.passage_ids, &d.query_vectors, &d.query_ids]
            .into_iter()
            .flatten()
        {
            vectors.insert(p.display().to_string(), sha256_file(p)?);
        }
        let manifest = Manifest {
            index_hash: cfg.index_hash(),
            config_hash: cfg.config_hash(),
            artifacts,
            vectors,
            passages: self.corpus.len(),
            queries: self.queries.len(),
            build: self.build,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    fn entity_graph(&self) -> Result<&BipartiteGraph> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::Config("entity graph was not built".into()))
    }

    fn bm25(&self, cfg: &RunConfig, q: &Query, k: usize) -> RankedList {
        bm25_search(&self.lexical, &q.question, k, &cfg.bm25)
    }

    fn dense(&self, cfg: &RunConfig, q: &Query, k: usize) -> Result<RankedList> {
        let store = self
            .passage_vectors
            .as_ref()
            .ok_or_else(|| Error::Config("dense retrieval needs passage vectors".into()))?;
        let qv = self
            .query_vectors
            .as_ref()
            .and_then(|s| s.row_by_id(&q.id))
            .ok_or_else(|| Error::Misaligned(format!("query {} has no vector", q.id)))?;
        match &self.hnsw {
            Some(h) => h.search(store, qv, k, cfg.dense.hnsw.ef_search.max(k)),
            None => exact_search(store, qv, k),
        }
        .map_err(|e| e.in_module("dense_retrieval"))
    }

    fn rrf(&self, cfg: &RunConfig, q: &Query) -> Result<RankedList> {
        let depth = cfg.fusion.depth;
        let lex = self.bm25(cfg, q, depth);
        let dense = self.dense(cfg, q, depth)?;
        rrf_fuse(&[&lex, &dense], cfg.fusion.rrf_k, depth).map_err(|e| e.in_module("fusion_rerank"))
    }

    fn rerank(&self, cfg: &RunConfig, q: &Query, candidates: &RankedList) -> Result<RankedList> {
        let scores = self
            .rerank_scores
            .as_ref()
            .ok_or_else(|| Error::Config("rerank methods need dataset.rerank_scores".into()))?;
        Ok(external_rerank(candidates, &q.id, &self.corpus, scores, cfg.fusion.rerank_top_n))
    }
}

/// One query's result plus the counters the reports need.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub ranked: RankedList,
    /// The configured seeding was empty and the fallback policy fired.
    pub fallback: bool,
    /// A bm25_top1 fallback found no BM25 hit and used uniform instead.
    pub degraded: bool,
    pub edges_visited: u64,
}

impl QueryOutcome {
    fn plain(ranked: RankedList) -> Self {
        QueryOutcome {
            ranked,
            fallback: false,
            degraded: false,
            edges_visited: 0,
        }
    }
}

/// Runs the configured method for one query. `cfg` must be the effective
/// config the artifacts were built with.
pub fn run_query(arts: &Artifacts, cfg: &RunConfig, q: &Query) -> Result<QueryOutcome> {
    let start = Instant::now();
    let depth = cfg.eval.retrieve_depth;
    let mut out = match cfg.method {
        Method::Bm25 => QueryOutcome::plain(arts.bm25(cfg, q, depth)),
        Method::Rm3 => QueryOutcome::plain(rm3_search(&arts.lexical, &q.question, depth, &cfg.rm3, &cfg.bm25)),
        Method::Bm25TwoStep => QueryOutcome::plain(two_step_search(
            &arts.lexical,
            &arts.corpus,
            &q.question,
            depth,
            &cfg.two_step,
            &cfg.bm25,
        )),
        Method::Dense => QueryOutcome::plain(arts.dense(cfg, q, depth)?),
        Method::Rrf => QueryOutcome::plain(arts.rrf(cfg, q)?.truncated(depth)),
        Method::Bm25Rerank => {
            let cands = arts.bm25(cfg, q, depth.max(cfg.fusion.rerank_top_n));
            QueryOutcome::plain(arts.rerank(cfg, q, &cands)?.truncated(depth))
        }
        Method::RrfRerank => {
            let cands = arts.rrf(cfg, q)?;
            QueryOutcome::plain(arts.rerank(cfg, q, &cands)?.truncated(depth))
        }
        Method::Graph | Method::GraphHybrid | Method::GraphDense | Method::GraphRrf | Method::RrfPprFusion => {
            graph_query(arts, cfg, q, start)?
        }
        Method::TfidfGraph => term_graph_query(arts, cfg, q, start)?,
    };
    let total = start.elapsed().as_secs_f64();
    let t = &mut out.ranked.timings;
    t.total_seconds = total;
    if !cfg.method.uses_entity_graph() && cfg.method != Method::TfidfGraph {
        t.seed_seconds = 0.0;
        t.traversal_seconds = 0.0;
    }
    Ok(out)
}

fn seed_or_fallback(
    arts: &Artifacts,
    cfg: &RunConfig,
    q: &Query,
    seed: SeedVector,
    n_docs: usize,
) -> (SeedVector, bool, bool) {
    if !seed.is_empty() {
        return (seed, false, false);
    }
    let top1 = (cfg.seed.fallback == Fallback::Bm25Top1).then(|| arts.bm25(cfg, q, 1));
    let (s, degraded) = fallback_seed(n_docs, cfg.seed.fallback, top1.as_ref());
    (s, true, degraded)
}

fn graph_query(arts: &Artifacts, cfg: &RunConfig, q: &Query, start: Instant) -> Result<QueryOutcome> {
    let g = arts.entity_graph()?;
    let seed_cfg = cfg.seed.for_method(cfg.method);
    let norm = arts.normalizer(cfg);
    let s_e = entity_seeds(&q.question, g, &norm, seed_cfg.q);
    let first_stage = match cfg.method {
        Method::Graph => None,
        Method::GraphHybrid => Some(arts.bm25(cfg, q, seed_cfg.k)),
        Method::GraphDense => Some(arts.dense(cfg, q, seed_cfg.k)?),
        _ => Some(arts.rrf(cfg, q)?),
    };
    let s_d = match &first_stage {
        Some(list) if !list.is_empty() => {
            passage_seeds(list, seed_cfg.k, seed_cfg.weighting, g).map_err(|e| e.in_module("seed_builder"))?
        }
        _ => SeedVector::default(),
    };
    let mixed = if s_e.is_empty() && s_d.is_empty() {
        SeedVector::default()
    } else {
        mix_seeds(&s_e, &s_d, seed_cfg.mixing).map_err(|e| e.in_module("seed_builder"))?
    };
    let (seed, fallback, degraded) = seed_or_fallback(arts, cfg, q, mixed, g.n_docs());
    let seeded = start.elapsed().as_secs_f64();

    let scores = ppr(g, &seed, &cfg.ppr).map_err(|e| e.in_module("ppr_engine"))?;
    let depth = cfg.eval.retrieve_depth;
    let mut ranked = match (&first_stage, cfg.method) {
        (Some(rrf), Method::RrfPprFusion) => score_fuse(rrf, g, &scores, cfg.fusion.ppr_weight)
            .map_err(|e| e.in_module("fusion_rerank"))?
            .truncated(depth),
        _ => rank_documents(g, &scores, depth),
    };
    ranked.timings = Timings {
        seed_seconds: seeded,
        traversal_seconds: start.elapsed().as_secs_f64() - seeded,
        total_seconds: 0.0,
    };
    Ok(QueryOutcome {
        ranked,
        fallback,
        degraded,
        edges_visited: scores.edges_visited,
    })
}

fn term_graph_query(arts: &Artifacts, cfg: &RunConfig, q: &Query, start: Instant) -> Result<QueryOutcome> {
    let g = arts
        .term_graph
        .as_ref()
        .ok_or_else(|| Error::Config("term graph was not built".into()))?;
    let s = term_seeds(&q.question, g, cfg.seed.q);
    let (seed, fallback, degraded) = seed_or_fallback(arts, cfg, q, s, g.n_docs());
    let seeded = start.elapsed().as_secs_f64();
    let scores = ppr(g, &seed, &cfg.ppr).map_err(|e| e.in_module("ppr_engine"))?;
    let mut ranked = rank_documents(g, &scores, cfg.eval.retrieve_depth);
    ranked.timings = Timings {
        seed_seconds: seeded,
        traversal_seconds: start.elapsed().as_secs_f64() - seeded,
        total_seconds: 0.0,
    };
    Ok(QueryOutcome {
        ranked,
        fallback,
        degraded,
        edges_visited: scores.edges_visited,
    })
}

/// All queries' rankings for one method, in query order.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub run: Run,
    pub outcomes: Vec<QueryOutcome>,
    pub fallback_count: usize,
    pub degraded_count: usize,
}

impl MethodRun {
    pub fn mean_edges_visited(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        self.outcomes.iter().map(|o| o.edges_visited as f64).sum::<f64>() / self.outcomes.len() as f64
    }
}

/// Runs every query in parallel; results are collected in query order.
pub fn run_method(arts: &Artifacts, cfg: &RunConfig, queries: &[Query]) -> Result<MethodRun> {
    let outcomes: Vec<QueryOutcome> = queries
        .par_iter()
        .map(|q| run_query(arts, cfg, q))
        .collect::<Result<_>>()?;
    let mut run = Run::new();
    for (q, o) in queries.iter().zip(&outcomes) {
        run.insert(
            q.id.clone(),
            RunEntry {
                ranked_ids: o.ranked.docs().map(|d| arts.corpus.id(d).to_string()).collect(),
                timings: o.ranked.timings,
            },
        );
    }
    Ok(MethodRun {
        fallback_count: outcomes.iter().filter(|o| o.fallback).count(),
        degraded_count: outcomes.iter().filter(|o| o.degraded).count(),
        run,
        outcomes,
    })
}

/// Runs and scores the configured method over `queries`.
pub fn evaluate(arts: &Artifacts, cfg: &RunConfig, queries: &[Query]) -> Result<(EvalReport, MethodRun)> {
    let mr = run_method(arts, cfg, queries)?;
    let mut report = compute_metrics(cfg.method.as_str(), &mr.run, queries).map_err(|e| e.in_module("eval_bench"))?;
    report.fallback_count = mr.fallback_count;
    report.fallback_rate = if queries.is_empty() {
        0.0
    } else {
        mr.fallback_count as f64 / queries.len() as f64
    };
    report.config_hash = cfg.config_hash();
    Ok((report, mr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn cfg(method: &str, extra: serde_json::Value) -> RunConfig {
        let mut v = json!({
            "method": method,
            "dataset": {"synthetic": {"n_docs": 200, "n_entities": 300, "hops": 2, "seed": 3}},
            "eval": {"retrieve_depth": 20},
        });
        crate::config::deep_merge(&mut v, extra);
        RunConfig::from_value(v).unwrap().effective()
    }

    #[test]
    fn every_lexical_and_graph_method_runs() {
        for m in ["bm25", "rm3", "bm25_2step", "graph", "graph_hybrid", "tfidf_graph"] {
            let c = cfg(m, json!({}));
            let arts = Artifacts::build(&c).unwrap();
            let (rep, mr) = evaluate(&arts, &c, &arts.queries[..10]).unwrap();
            assert_eq!(rep.per_query.len(), 10, "{m}");
            assert!(mr.outcomes.iter().all(|o| o.ranked.len() <= 20));
            assert!(rep.aggregates.recall_at_10 > 0.0, "{m} found nothing");
            for e in mr.run.values() {
                let t = e.timings;
                assert!(t.total_seconds >= t.seed_seconds + t.traversal_seconds - 1e-9);
            }
        }
    }

    #[test]
    fn graph_without_entities_falls_back() {
        let c = cfg("graph", json!({}));
        let arts = Artifacts::build(&c).unwrap();
        let q = Query {
            id: "x".into(),
            question: "no names here at all".into(),
            gold_ids: Default::default(),
        };
        let o = run_query(&arts, &c, &q).unwrap();
        assert!(o.fallback);
        assert_eq!(o.ranked.len(), 20);

        let c = cfg("graph", json!({"seed": {"fallback": "bm25_top1"}}));
        let o = run_query(&arts, &c, &q).unwrap();
        assert!(o.fallback && o.degraded);
    }

    #[test]
    fn dense_methods_need_vectors() {
        let mut c = cfg("graph_dense", json!({}));
        c.dataset.passage_vectors = Some("/nonexistent/p.vec".into());
        c.dataset.passage_ids = Some("/nonexistent/p.ids".into());
        c.dataset.query_vectors = Some("/nonexistent/q.vec".into());
        c.dataset.query_ids = Some("/nonexistent/q.ids".into());
        assert!(Artifacts::build(&c).is_err());
    }

    #[test]
    fn index_round_trip_reuses_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("graph_hybrid", json!({}));
        let arts = Artifacts::build(&c).unwrap();
        let m1 = arts.save(&c, dir.path()).unwrap();
        let m2 = Artifacts::build(&c).unwrap().save(&c, dir.path()).unwrap();
        assert_eq!(m1.artifacts, m2.artifacts);

        let loaded = Artifacts::load_or_build(&c, dir.path()).unwrap();
        assert_eq!(loaded.graph, arts.graph);
        let a = run_method(&arts, &c, &arts.queries[..5]).unwrap();
        let b = run_method(&loaded, &c, &loaded.queries[..5]).unwrap();
        let ids = |r: &Run| r.values().map(|e| e.ranked_ids.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.run), ids(&b.run));
    }
}
