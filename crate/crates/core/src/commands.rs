//! The command implementations behind the `sprig` binary: index, eval,
//! ablate, bench, stats and significance. Each writes its tables under the
//! configured output directory and returns the rows it wrote.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{expand_grid, Method, RunConfig};
use crate::corpus::{for_each_json_line, generate_synthetic, parse_line, Query, SyntheticParams};
use crate::error::{Error, Result};
use crate::eval::{
    assign_ner_buckets, compute_metrics, hub_pruning_coverage, ner_proxy_buckets, paired_bootstrap,
    peak_rss_kb, read_predictions, scaling_sweep, write_predictions, write_tsv, BootstrapResult, EvalReport,
    HubCoverage, LatencyStats, Run, ScalingReport, SUMMARY_HEADER,
};
use crate::graph::GraphStats;
use crate::pipeline::{evaluate, Artifacts, Manifest};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Directory holding persisted artifacts for a config.
pub fn index_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("index")
}

/// Builds and persists the graph and lexical artifacts.
pub fn cmd_index(cfg: &RunConfig) -> Result<Manifest> {
    let cfg = cfg.effective();
    cfg.check_method_inputs()?;
    let arts = Artifacts::build(&cfg)?;
    let dir = index_dir(&cfg);
    let manifest = arts.save(&cfg, &dir)?;
    log::info!(
        "indexed {} passages in {:.3}s (graph {:.3}s, lexical {:.3}s)",
        manifest.passages,
        arts.build.entity_seconds + arts.build.graph_seconds + arts.build.lexical_seconds,
        arts.build.entity_seconds + arts.build.graph_seconds,
        arts.build.lexical_seconds
    );
    Ok(manifest)
}

/// Files written by one evaluation.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub run: Run,
    pub dir: PathBuf,
    pub summary_row: String,
}

fn run_label(cfg: &RunConfig) -> String {
    match cfg.variant {
        crate::config::Variant::Base => cfg.method.as_str().to_string(),
        v => format!("{}{}", cfg.method, v.as_str()),
    }
}

/// Runs the configured method over every query and writes the summary
/// table, per-query run file, predictions and full report.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalOutput> {
    let cfg = cfg.effective();
    cfg.check_method_inputs()?;
    let arts = Artifacts::load_or_build(&cfg, &index_dir(&cfg))?;
    let (mut report, mr) = evaluate(&arts, &cfg, &arts.queries)?;
    report.method = run_label(&cfg);
    let dir = cfg.out_dir.join(&report.method);
    create_dir(&dir)?;
    let summary_row = report.summary_row();
    write_tsv(&dir.join("summary.tsv"), SUMMARY_HEADER, std::slice::from_ref(&summary_row))?;
    report.write_run_file(&dir.join("run.jsonl"))?;
    write_predictions(&dir.join("predictions.jsonl"), &mr.run, &arts.queries)?;
    write_json(&dir.join("report.json"), &report)?;
    if cfg.method.uses_entity_graph() {
        if let Some(g) = &arts.graph {
            let buckets = assign_ner_buckets(g, &arts.corpus, &arts.queries, &arts.normalizer(&cfg));
            let rows: Vec<String> = ner_proxy_buckets(&buckets, &[&report])
                .iter()
                .map(|r| {
                    format!(
                        "{}\t{}\t{}\t{:.1}\t{:.3}\t{:.3}",
                        cfg.ner.mode.as_str(),
                        r.bucket.as_str(),
                        r.method,
                        r.pct_queries,
                        r.recall_at_10,
                        r.mrr
                    )
                })
                .collect();
            write_tsv(&dir.join("ner_buckets.tsv"), "NER\tBucket\tMethod\t%Queries\tR@10\tMRR", &rows)?;
        }
    }
    if mr.degraded_count > 0 {
        log::warn!("{} bm25_top1 fallbacks degraded to uniform", mr.degraded_count);
    }
    Ok(EvalOutput {
        report,
        run: mr.run,
        dir,
        summary_row,
    })
}

/// Deterministic `size`-query subset, kept in original order.
pub fn sample_subset(queries: &[Query], size: usize, seed: u64) -> Vec<Query> {
    if size >= queries.len() {
        return queries.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, queries.len(), size).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| queries[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub cell: BTreeMap<String, Value>,
    pub ner: String,
    pub k: usize,
    pub alpha: f64,
    pub iterations: usize,
    pub recall_at_5: f64,
    pub recall_at_10: f64,
    pub mrr: f64,
    pub qtime_s: f64,
}

pub const ABLATION_HEADER: &str = "NER\tk\talpha\tit\tR@5\tR@10\tMRR\tQTime\tCell";

impl AblationRow {
    pub fn tsv(&self) -> String {
        let cell = serde_json::to_string(&self.cell).expect("cell serializes");
        format!(
            "{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.1}\t{}",
            self.ner, self.k, self.alpha, self.iterations, self.recall_at_5, self.recall_at_10, self.mrr, self.qtime_s, cell
        )
    }
}

/// Loads a grid file: a JSON object mapping dotted keys to value lists.
pub fn load_grid(path: &Path) -> Result<BTreeMap<String, Vec<Value>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Evaluates each grid cell on the same query subset and writes the cells
/// sorted by R@10, best first.
pub fn cmd_ablate(cfg: &RunConfig, grid: &BTreeMap<String, Vec<Value>>) -> Result<Vec<AblationRow>> {
    let cells = expand_grid(grid)?;
    let mut cache: HashMap<String, Artifacts> = HashMap::new();
    let mut rows = Vec::with_capacity(cells.len());
    let mut subset: Option<Vec<Query>> = None;
    for cell in cells {
        let c = cfg.with_overrides(&cell)?.effective();
        c.check_method_inputs()?;
        let key = format!("{}/{}", c.index_hash(), c.method);
        if !cache.contains_key(&key) {
            cache.insert(key.clone(), Artifacts::build(&c)?);
        }
        let arts = &cache[&key];
        let queries = subset.get_or_insert_with(|| sample_subset(&arts.queries, cfg.eval.subset_size, cfg.rng_seed));
        let (report, _) = evaluate(arts, &c, queries)?;
        let seed_cfg = c.seed.for_method(c.method);
        rows.push(AblationRow {
            cell,
            ner: format!("{}/{}", c.ner.mode.as_str(), c.ner.normalization.as_str()),
            k: seed_cfg.k,
            alpha: c.ppr.alpha,
            iterations: c.ppr.max_iter,
            recall_at_5: report.aggregates.recall_at_5,
            recall_at_10: report.aggregates.recall_at_10,
            mrr: report.aggregates.mrr,
            qtime_s: report.aggregates.qtime_total_s,
        });
    }
    rows.sort_by(|a, b| b.recall_at_10.total_cmp(&a.recall_at_10));
    create_dir(&cfg.out_dir)?;
    let lines: Vec<String> = rows.iter().map(AblationRow::tsv).collect();
    write_tsv(&cfg.out_dir.join("ablation.tsv"), ABLATION_HEADER, &lines)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchOutput {
    pub method: String,
    pub scaling: ScalingReport,
    pub latency: Option<LatencyStats>,
    pub mean_seed_s: f64,
    pub mean_traversal_s: f64,
    pub peak_rss_kb: Option<u64>,
}

/// Times graph index construction over synthetic corpora of each
/// configured size, then per-query latency of the configured method on the
/// configured dataset.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchOutput> {
    let cfg = cfg.effective();
    let b = &cfg.bench;
    let mut bench_cfg = cfg.clone();
    if cfg.method.uses_dense() || cfg.method.uses_rerank_scores() {
        bench_cfg.method = Method::GraphHybrid;
    }
    let scaling = scaling_sweep(&b.sizes, b.trials, |n| {
        let (corpus, queries) = generate_synthetic(SyntheticParams {
            n_docs: n,
            n_entities: ((n as f64 * b.entity_ratio) as usize).max(b.hops + 1),
            hops: b.hops,
            seed: cfg.rng_seed,
        })?;
        let queries: Vec<Query> = queries.into_iter().take(b.queries).collect();
        let arts = Artifacts::from_parts(&bench_cfg, corpus, queries)?;
        let index = arts.build.entity_seconds + arts.build.graph_seconds;
        let (report, _) = evaluate(&arts, &bench_cfg, &arts.queries)?;
        Ok((Some(index), report.aggregates.qtime_total_s))
    })?;

    cfg.check_method_inputs()?;
    let arts = Artifacts::load_or_build(&cfg, &index_dir(&cfg))?;
    let (report, _) = evaluate(&arts, &cfg, &arts.queries)?;
    let n = report.per_query.len().max(1) as f64;
    let out = BenchOutput {
        method: run_label(&cfg),
        latency: report.latency,
        mean_seed_s: report.per_query.iter().map(|m| m.seed_s).sum::<f64>() / n,
        mean_traversal_s: report.per_query.iter().map(|m| m.traversal_s).sum::<f64>() / n,
        scaling,
        peak_rss_kb: peak_rss_kb(),
    };

    create_dir(&cfg.out_dir)?;
    let rows: Vec<String> = out
        .scaling
        .rows
        .iter()
        .map(|r| format!("{}\t{:.4}\t{:.4}\t{:.4}", r.size, r.index_seconds, r.query_seconds, r.ms_per_doc))
        .collect();
    write_tsv(&cfg.out_dir.join("bench_scaling.tsv"), "Size\tIndexTime\tQueryTime\tms/doc", &rows)?;
    let lat = out
        .latency
        .map(|l| format!("{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}", out.method, l.p50, l.p95, l.p99, out.mean_seed_s, out.mean_traversal_s));
    write_tsv(
        &cfg.out_dir.join("bench_latency.tsv"),
        "Method\tp50\tp95\tp99\tSeed\tPPR",
        &lat.into_iter().collect::<Vec<_>>(),
    )?;
    write_json(&cfg.out_dir.join("bench.json"), &out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsOutput {
    pub passages: usize,
    pub queries: usize,
    pub entities: usize,
    pub graph: GraphStats,
    pub hub_coverage: HubCoverage,
    pub missing_support_titles: usize,
    pub empty_gold_queries: usize,
    pub merged_duplicates: usize,
}

/// Graph size and degree statistics plus hub-pruning gold coverage.
pub fn cmd_stats(cfg: &RunConfig) -> Result<StatsOutput> {
    let cfg = cfg.effective();
    let arts = Artifacts::load_or_build(&cfg, &index_dir(&cfg))?;
    let g = arts
        .graph
        .as_ref()
        .ok_or_else(|| Error::Config("stats needs the entity graph".into()))?;
    let pct = if cfg.graph.prune_hub_pct > 0.0 {
        cfg.graph.prune_hub_pct
    } else {
        crate::config::PRUNE_HUB_PCT
    };
    let out = StatsOutput {
        passages: arts.corpus.len(),
        queries: arts.queries.len(),
        entities: g.n_entities(),
        graph: g.stats(),
        hub_coverage: hub_pruning_coverage(g, &arts.corpus, &arts.queries, &arts.normalizer(&cfg), pct),
        missing_support_titles: arts.load_report.missing_support_titles,
        empty_gold_queries: arts.load_report.empty_gold_queries,
        merged_duplicates: arts.load_report.merged_duplicates,
    };
    create_dir(&cfg.out_dir)?;
    write_tsv(
        &cfg.out_dir.join("graph_stats.tsv"),
        "Nodes\tEdges\tp95 entity deg\tp95 doc deg",
        &[format!(
            "{}\t{}\t{}\t{}",
            out.graph.nodes, out.graph.edges, out.graph.p95_entity_degree, out.graph.p95_doc_degree
        )],
    )?;
    let h = &out.hub_coverage;
    write_tsv(
        &cfg.out_dir.join("hub_coverage.tsv"),
        "Hub Top%\tGold Removed %\tQueries Affected %",
        &[format!("{:.1}\t{:.2}\t{:.2}", h.hub_top_pct * 100.0, h.gold_removed_pct, h.queries_affected_pct)],
    )?;
    write_json(&cfg.out_dir.join("stats.json"), &out)?;
    Ok(out)
}

#[derive(Deserialize)]
struct GoldLine {
    id: String,
    gold_ids: std::collections::BTreeSet<String>,
    #[serde(default)]
    question: String,
}

/// Reads the query lines (those carrying `gold_ids`) of a generic JSONL
/// file; passage lines are skipped.
pub fn read_gold(path: &Path) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for_each_json_line(path, |line_no, value| {
        if value.get("gold_ids").is_none() {
            return Ok(());
        }
        let g: GoldLine = parse_line(path, line_no, value)?;
        out.push(Query {
            id: g.id,
            question: g.question,
            gold_ids: g.gold_ids,
        });
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub method: String,
    pub result: BootstrapResult,
}

pub const SIGNIFICANCE_HEADER: &str = "Method\tΔR@10\tCI\tW/T/L";

impl SignificanceRow {
    pub fn tsv(&self) -> String {
        let r = &self.result;
        format!(
            "{}\t{:+.3}\t[{:+.3}, {:+.3}]\t{}",
            self.method,
            r.delta_mean,
            r.ci_low,
            r.ci_high,
            r.wtl()
        )
    }
}

fn check_same_queries(a: &Run, b: &Run, a_name: &str, b_name: &str) -> Result<()> {
    let only_a: Vec<&String> = a.keys().filter(|k| !b.contains_key(*k)).take(5).collect();
    let only_b: Vec<&String> = b.keys().filter(|k| !a.contains_key(*k)).take(5).collect();
    if only_a.is_empty() && only_b.is_empty() {
        return Ok(());
    }
    Err(Error::Misaligned(format!(
        "{a_name} and {b_name} cover different queries: only in {a_name} {only_a:?}, only in {b_name} {only_b:?}"
    )))
}

fn stem(path: &Path) -> String {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".jsonl").unwrap_or(&name).to_string()
}

/// Paired bootstrap on ΔR@10 of each prediction file against `baseline`.
pub fn cmd_significance(
    predictions: &[(String, PathBuf)],
    baseline: &Path,
    gold: &[Query],
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<Vec<SignificanceRow>> {
    let base_run = read_predictions(baseline)?;
    let base = compute_metrics("baseline", &base_run, gold)?;
    let mut rows = Vec::with_capacity(predictions.len());
    for (name, path) in predictions {
        let run = read_predictions(path)?;
        check_same_queries(&run, &base_run, &path.display().to_string(), &baseline.display().to_string())?;
        let rep = compute_metrics(name, &run, gold)?;
        let result = paired_bootstrap(
            &rep.recall_at_10_by_query(),
            &base.recall_at_10_by_query(),
            resamples,
            confidence,
            seed,
        )?;
        rows.push(SignificanceRow {
            method: name.clone(),
            result,
        });
    }
    Ok(rows)
}

/// Names prediction files by their file stem, or the parent directory
/// when the stem is the generic `predictions`.
pub fn label_predictions(paths: &[PathBuf]) -> Vec<(String, PathBuf)> {
    paths
        .iter()
        .map(|p| {
            let s = stem(p);
            let name = if s == "predictions" {
                p.parent()
                    .and_then(|d| d.file_name())
                    .map(|d| d.to_string_lossy().into_owned())
                    .unwrap_or(s)
            } else {
                s
            };
            (name, p.clone())
        })
        .collect()
}

pub fn write_significance(path: &Path, rows: &[SignificanceRow]) -> Result<()> {
    let lines: Vec<String> = rows.iter().map(SignificanceRow::tsv).collect();
    write_tsv(path, SIGNIFICANCE_HEADER, &lines)
}
