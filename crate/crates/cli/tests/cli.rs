//! End-to-end runs of the `sprig` binary on small synthetic corpora.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;
use sprig::corpus::{generate_synthetic, SyntheticParams};
use sprig::dense::save_vectors;

const SYN: SyntheticParams = SyntheticParams {
    n_docs: 120,
    n_entities: 180,
    hops: 2,
    seed: 11,
};

fn sprig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sprig"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, extra: serde_json::Value) -> PathBuf {
    let mut cfg = json!({
        "out_dir": dir.join("out"),
        "dataset": {"synthetic": SYN_JSON()},
        "eval": {"retrieve_depth": 20, "subset_size": 10},
        "bench": {"sizes": [60, 120], "trials": 1, "queries": 5},
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[allow(non_snake_case)]
fn SYN_JSON() -> serde_json::Value {
    json!({"n_docs": SYN.n_docs, "n_entities": SYN.n_entities, "hops": SYN.hops, "seed": SYN.seed})
}

/// Deterministic pseudo-random vectors for every passage and query.
fn write_vectors(dir: &Path) -> serde_json::Value {
    let (corpus, queries) = generate_synthetic(SYN).unwrap();
    let dim = 8;
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 40) as f32 / (1u64 << 24) as f32 - 0.5
    };
    let pids: Vec<String> = corpus.passages().iter().map(|p| p.id.clone()).collect();
    let pdata: Vec<f32> = (0..pids.len() * dim).map(|_| next()).collect();
    let qids: Vec<String> = queries.iter().map(|q| q.id.clone()).collect();
    let qdata: Vec<f32> = (0..qids.len() * dim).map(|_| next()).collect();
    save_vectors(&dir.join("p.vec"), &dir.join("p.ids"), dim, &pdata, &pids).unwrap();
    save_vectors(&dir.join("q.vec"), &dir.join("q.ids"), dim, &qdata, &qids).unwrap();

    let scores: String = queries
        .iter()
        .flat_map(|q| {
            q.gold_ids
                .iter()
                .map(move |g| format!("{{\"query_id\":\"{}\",\"passage_id\":\"{g}\",\"score\":10.0}}\n", q.id))
        })
        .collect();
    fs::write(dir.join("scores.jsonl"), scores).unwrap();
    json!({
        "synthetic": SYN_JSON(),
        "passage_vectors": dir.join("p.vec"),
        "passage_ids": dir.join("p.ids"),
        "query_vectors": dir.join("q.vec"),
        "query_ids": dir.join("q.ids"),
        "rerank_scores": dir.join("scores.jsonl"),
    })
}

#[test]
fn eval_writes_one_prediction_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"method": "graph"}));
    let o = sprig(&["eval", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("Method\tR@5\tR@10\tHit@10\tMRR\tQTime"));
    let n_queries = generate_synthetic(SYN).unwrap().1.len();
    let preds = fs::read_to_string(dir.path().join("out/graph/predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), n_queries);
    for file in ["summary.tsv", "run.jsonl", "report.json", "ner_buckets.tsv"] {
        assert!(dir.path().join("out/graph").join(file).exists(), "{file}");
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({}));
    let out = dir.path().join("elsewhere");
    let o = sprig(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "bm25",
        "--out",
        out.to_str().unwrap(),
        "--queries-limit",
        "7",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = fs::read_to_string(out.join("bm25/predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 7);
}

#[test]
fn predictions_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"method": "graph_hybrid", "defaults": "hotpot-defaults"}));
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = sprig(&["eval", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out.join("graph_hybrid/predictions.jsonl")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn bad_input_exits_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({}));
    let o = sprig(&["eval", "--config", cfg.to_str().unwrap(), "--method", "graph_magic"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown method graph_magic"), "{}", stderr(&o));

    let bad = write_config(dir.path(), json!({"ppr": {"alpah": 0.2}}));
    let o = sprig(&["eval", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("alpah"), "{}", stderr(&o));

    let o = sprig(&["eval"]);
    assert!(!o.status.success());
}

#[test]
fn missing_vectors_fail_before_queries_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"method": "graph_dense"}));
    let o = sprig(&["eval", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("passage_vectors"), "{}", stderr(&o));
    assert!(!dir.path().join("out/graph_dense").exists());
}

#[test]
fn dense_fusion_and_rerank_methods_run() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = write_vectors(dir.path());
    for method in ["dense", "rrf", "graph_dense", "graph_rrf", "rrf_ppr_fusion", "bm25_rerank", "rrf_rerank"] {
        let cfg = write_config(dir.path(), json!({"method": method, "dataset": dataset}));
        let o = sprig(&["eval", "--config", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
    }
    // Gold passages carry the only external scores, so reranking puts them first.
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/bm25_rerank/report.json")).unwrap()).unwrap();
    let bm25_rerank_mrr = report["aggregates"]["mrr"].as_f64().unwrap();
    assert!(bm25_rerank_mrr > 0.5, "{bm25_rerank_mrr}");
}

#[test]
fn index_twice_gives_identical_fingerprints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"method": "tfidf_graph"}));
    let a = sprig(&["index", "--config", cfg.to_str().unwrap()]);
    let b = sprig(&["index", "--config", cfg.to_str().unwrap()]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("term_graph.sprig"));
    let o = sprig(&["eval", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn significance_of_a_file_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"method": "bm25"}));
    assert!(sprig(&["eval", "--config", cfg.to_str().unwrap()]).status.success());
    let preds = dir.path().join("out/bm25/predictions.jsonl");
    let o = sprig(&[
        "significance",
        "--config",
        cfg.to_str().unwrap(),
        "--baseline",
        preds.to_str().unwrap(),
        "--pred",
        preds.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("Method\tΔR@10\tCI\tW/T/L"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("bm25\t+0.000\t[+0.000, +0.000]\t0/"), "{row}");
    assert!(dir.path().join("out/significance.tsv").exists());
}

#[test]
fn ablate_stats_and_bench_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"method": "graph_hybrid"}));
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"seed.k": [3, 5], "ppr.alpha": [0.15, 0.5]}"#).unwrap();
    let o = sprig(&["ablate", "--config", cfg.to_str().unwrap(), "--grid", grid.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    let r10: Vec<f64> = text.lines().skip(1).map(|l| l.split('\t').nth(5).unwrap().parse().unwrap()).collect();
    assert!(r10.windows(2).all(|w| w[0] >= w[1]));

    let o = sprig(&["stats", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("120 passages"));

    let o = sprig(&["bench", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("linear fit"));
}
