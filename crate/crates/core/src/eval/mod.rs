//! Retrieval metrics, significance testing, latency and scaling
//! measurements, and the report files built from them.

mod analysis;
mod bootstrap;
mod timing;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{for_each_json_line, parse_line, Query};
use crate::error::{Error, Result};
use crate::ranked::Timings;

pub use analysis::{
    assign_ner_buckets, hub_pruning_coverage, ner_proxy_buckets, HubCoverage, NerBucket, NerBucketRow,
};
pub use bootstrap::{paired_bootstrap, BootstrapResult};
pub use timing::{
    latency_stats, linear_fit, peak_rss_kb, scaling_sweep, LatencyStats, LinearFit, ScalingReport,
    ScalingRow,
};

/// One query's ranked passage ids and timing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub ranked_ids: Vec<String>,
    pub timings: Timings,
}

/// Query id → ranking.
pub type Run = BTreeMap<String, RunEntry>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub recall_at_5: f64,
    pub recall_at_10: f64,
    pub hit_at_10: f64,
    pub reciprocal_rank: f64,
    pub seed_s: f64,
    pub traversal_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub recall_at_5: f64,
    pub recall_at_10: f64,
    pub hit_at_10: f64,
    pub mrr: f64,
    /// Mean per-query total seconds.
    pub qtime_s: f64,
    /// Summed per-query total seconds.
    pub qtime_total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub per_query: Vec<QueryMetrics>,
    pub aggregates: Aggregates,
    /// Queries with no gold passage; excluded from every mean.
    pub empty_gold_excluded: usize,
    /// Scored queries absent from the run (counted as empty rankings).
    pub missing_from_run: usize,
    pub fallback_rate: f64,
    pub fallback_count: usize,
    pub latency: Option<LatencyStats>,
    pub config_hash: String,
}

/// `|top-k ∩ gold| / |gold|`.
pub fn recall_at(ranked: &[String], gold: &BTreeSet<String>, k: usize) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|id| gold.contains(*id)).count();
    hits as f64 / gold.len() as f64
}

pub fn hit_at(ranked: &[String], gold: &BTreeSet<String>, k: usize) -> f64 {
    if ranked.iter().take(k).any(|id| gold.contains(id)) {
        1.0
    } else {
        0.0
    }
}

/// `1 / rank` of the first gold passage, 0 when none is retrieved.
pub fn reciprocal_rank(ranked: &[String], gold: &BTreeSet<String>) -> f64 {
    ranked
        .iter()
        .position(|id| gold.contains(id))
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores `run` against `queries`. Run keys must all be query ids.
pub fn compute_metrics(method: &str, run: &Run, queries: &[Query]) -> Result<EvalReport> {
    let known: HashSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    let unknown: Vec<&String> = run.keys().filter(|k| !known.contains(k.as_str())).take(5).collect();
    if !unknown.is_empty() {
        return Err(Error::Misaligned(format!("run has ids that are not queries: {unknown:?}")));
    }
    let empty = RunEntry::default();
    let mut per_query = Vec::with_capacity(queries.len());
    let mut empty_gold = 0;
    let mut missing = 0;
    for q in queries {
        if q.gold_ids.is_empty() {
            empty_gold += 1;
            continue;
        }
        let entry = run.get(&q.id).unwrap_or_else(|| {
            missing += 1;
            &empty
        });
        let r = &entry.ranked_ids;
        per_query.push(QueryMetrics {
            query_id: q.id.clone(),
            recall_at_5: recall_at(r, &q.gold_ids, 5),
            recall_at_10: recall_at(r, &q.gold_ids, 10),
            hit_at_10: hit_at(r, &q.gold_ids, 10),
            reciprocal_rank: reciprocal_rank(r, &q.gold_ids),
            seed_s: entry.timings.seed_seconds,
            traversal_s: entry.timings.traversal_seconds,
            total_s: entry.timings.total_seconds,
        });
    }
    let aggregates = Aggregates {
        recall_at_5: mean(per_query.iter().map(|m| m.recall_at_5)),
        recall_at_10: mean(per_query.iter().map(|m| m.recall_at_10)),
        hit_at_10: mean(per_query.iter().map(|m| m.hit_at_10)),
        mrr: mean(per_query.iter().map(|m| m.reciprocal_rank)),
        qtime_s: mean(per_query.iter().map(|m| m.total_s)),
        qtime_total_s: per_query.iter().map(|m| m.total_s).sum(),
    };
    let latency = latency_stats(&per_query.iter().map(|m| m.total_s).collect::<Vec<_>>()).ok();
    Ok(EvalReport {
        method: method.to_string(),
        per_query,
        aggregates,
        empty_gold_excluded: empty_gold,
        missing_from_run: missing,
        fallback_rate: 0.0,
        fallback_count: 0,
        latency,
        config_hash: String::new(),
    })
}

impl EvalReport {
    pub fn recall_at_10_by_query(&self) -> Vec<(String, f64)> {
        self.per_query
            .iter()
            .map(|m| (m.query_id.clone(), m.recall_at_10))
            .collect()
    }

    /// Summary row matching [`SUMMARY_HEADER`].
    pub fn summary_row(&self) -> String {
        let a = &self.aggregates;
        format!(
            "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.1}",
            self.method, a.recall_at_5, a.recall_at_10, a.hit_at_10, a.mrr, a.qtime_total_s
        )
    }

    /// One JSON metrics object per query per line.
    pub fn write_run_file(&self, path: &Path) -> Result<()> {
        write_lines(path, self.per_query.iter())
    }
}

pub const SUMMARY_HEADER: &str = "Method\tR@5\tR@10\tHit@10\tMRR\tQTime";

fn write_lines<'a, T: Serialize + 'a>(path: &Path, rows: impl Iterator<Item = &'a T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_tsv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionLine {
    pub query_id: String,
    pub ranked_ids: Vec<String>,
}

/// Writes `{"query_id","ranked_ids"}` lines in `queries` order.
pub fn write_predictions(path: &Path, run: &Run, queries: &[Query]) -> Result<()> {
    let lines: Vec<PredictionLine> = queries
        .iter()
        .map(|q| PredictionLine {
            query_id: q.id.clone(),
            ranked_ids: run.get(&q.id).map(|e| e.ranked_ids.clone()).unwrap_or_default(),
        })
        .collect();
    write_lines(path, lines.iter())
}

pub fn read_predictions(path: &Path) -> Result<Run> {
    let mut run = Run::new();
    for_each_json_line(path, |line_no, value| {
        let line: PredictionLine = parse_line(path, line_no, value)?;
        if run.contains_key(&line.query_id) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                record: line_no,
                message: format!("duplicate query id {}", line.query_id),
            });
        }
        run.insert(
            line.query_id,
            RunEntry {
                ranked_ids: line.ranked_ids,
                timings: Timings::default(),
            },
        );
        Ok(())
    })?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn gold(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn query(id: &str, g: &[&str]) -> Query {
        Query {
            id: id.into(),
            question: String::new(),
            gold_ids: gold(g),
        }
    }

    #[test]
    fn metric_examples() {
        let r = ids(&["x", "a", "y"]);
        assert_eq!(recall_at(&r, &gold(&["a", "b"]), 10), 0.5);
        assert_eq!(reciprocal_rank(&ids(&["x", "y", "a"]), &gold(&["a"])), 1.0 / 3.0);
        assert_eq!(reciprocal_rank(&ids(&["x", "y"]), &gold(&["a"])), 0.0);
        assert_eq!(hit_at(&r, &gold(&["a"]), 1), 0.0);
        assert_eq!(hit_at(&r, &gold(&["a"]), 2), 1.0);
    }

    #[test]
    fn missing_and_empty_gold_queries() {
        let queries = vec![query("q1", &["a"]), query("q2", &["b"]), query("q3", &[])];
        let mut run = Run::new();
        run.insert(
            "q1".into(),
            RunEntry {
                ranked_ids: ids(&["a"]),
                timings: Timings::default(),
            },
        );
        let rep = compute_metrics("m", &run, &queries).unwrap();
        assert_eq!(rep.per_query.len(), 2);
        assert_eq!(rep.missing_from_run, 1);
        assert_eq!(rep.empty_gold_excluded, 1);
        assert_eq!(rep.aggregates.mrr, 0.5);

        run.insert("bogus".into(), RunEntry::default());
        assert!(matches!(compute_metrics("m", &run, &queries), Err(Error::Misaligned(_))));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let queries = vec![query("q1", &["a"]), query("q2", &["b"])];
        let mut run = Run::new();
        run.insert(
            "q1".into(),
            RunEntry {
                ranked_ids: ids(&["a", "c"]),
                timings: Timings::default(),
            },
        );
        write_predictions(&path, &run, &queries).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = read_predictions(&path).unwrap();
        assert_eq!(back["q1"].ranked_ids, ids(&["a", "c"]));
        assert!(back["q2"].ranked_ids.is_empty());
    }

    proptest! {
        #[test]
        fn hit_dominates_recall_and_rr_bound(
            ranked in proptest::collection::vec(0u8..15, 0..12),
            g in proptest::collection::btree_set(0u8..15, 1..5))
        {
            let mut seen = BTreeSet::new();
            let ranked: Vec<String> = ranked.into_iter().filter(|x| seen.insert(*x)).map(|x| x.to_string()).collect();
            let g: BTreeSet<String> = g.into_iter().map(|x| x.to_string()).collect();
            for k in [5, 10] {
                let (r, h) = (recall_at(&ranked, &g, k), hit_at(&ranked, &g, k));
                prop_assert!(h >= r);
                prop_assert!((0.0..=1.0).contains(&r));
                if h == 1.0 {
                    prop_assert!(reciprocal_rank(&ranked, &g) >= 1.0 / k as f64);
                }
                if g.len() == 1 {
                    prop_assert_eq!(h, r);
                }
            }
        }
    }
}
