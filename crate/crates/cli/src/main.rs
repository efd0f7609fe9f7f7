//! `sprig`: build indexes, run retrieval pipelines, and produce evaluation
//! tables from a JSON run configuration.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sprig::commands::{
    cmd_ablate, cmd_bench, cmd_eval, cmd_index, cmd_significance, cmd_stats, label_predictions, load_grid, read_gold,
    write_significance, ABLATION_HEADER,
};
use sprig::config::{Method, RunConfig};
use sprig::eval::SUMMARY_HEADER;
use sprig::pipeline::load_dataset;

#[derive(Parser)]
#[command(name = "sprig", version, about = "Entity-graph PPR retrieval and evaluation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Pipeline id, overriding the config.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Evaluate only the first N queries.
    #[arg(long, global = true)]
    queries_limit: Option<usize>,
    /// RNG seed for subsets, bootstrap and HNSW.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and persist the graph and lexical index.
    Index,
    /// Run the configured method and write reports and predictions.
    Eval,
    /// Evaluate a parameter grid on a query subset.
    Ablate {
        /// JSON object of dotted keys to value lists.
        #[arg(long)]
        grid: PathBuf,
    },
    /// Index-time scaling sweep and per-query latency.
    Bench,
    /// Graph statistics and hub-pruning coverage.
    Stats,
    /// Paired bootstrap of ΔR@10 against a baseline predictions file.
    Significance {
        #[arg(long)]
        baseline: PathBuf,
        /// Predictions file to compare; repeatable.
        #[arg(long = "pred", required = true)]
        preds: Vec<PathBuf>,
        /// Query file with gold ids; defaults to the configured dataset.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let path = common.config.as_ref().context("--config is required for this command")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(m) = &common.method {
        cfg.method = m.parse::<Method>()?;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(n) = common.queries_limit {
        cfg.eval.queries_limit = Some(n);
    }
    if let Some(s) = common.seed {
        cfg.rng_seed = s;
        cfg.dense.hnsw.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index => {
            let cfg = load_config(&cli.common)?;
            let m = cmd_index(&cfg)?;
            println!("index {} ({} passages, {} queries)", m.index_hash, m.passages, m.queries);
            for (name, hash) in &m.artifacts {
                println!("{name}\t{hash}");
            }
        }
        Command::Eval => {
            let cfg = load_config(&cli.common)?;
            let out = cmd_eval(&cfg)?;
            println!("{SUMMARY_HEADER}\n{}", out.summary_row);
            println!(
                "fallback rate {:.3} ({} queries); reports in {}",
                out.report.fallback_rate,
                out.report.fallback_count,
                out.dir.display()
            );
        }
        Command::Ablate { grid } => {
            let cfg = load_config(&cli.common)?;
            let rows = cmd_ablate(&cfg, &load_grid(&grid)?)?;
            println!("{ABLATION_HEADER}");
            for r in &rows {
                println!("{}", r.tsv());
            }
        }
        Command::Bench => {
            let cfg = load_config(&cli.common)?;
            let b = cmd_bench(&cfg)?;
            println!("Size\tIndexTime\tQueryTime\tms/doc");
            for r in &b.scaling.rows {
                println!("{}\t{:.4}\t{:.4}\t{:.4}", r.size, r.index_seconds, r.query_seconds, r.ms_per_doc);
            }
            println!("index-time linear fit R² {:.4}", b.scaling.fit.r_squared);
            if let Some(l) = b.latency {
                println!("{} latency p50 {:.4}s p95 {:.4}s p99 {:.4}s", b.method, l.p50, l.p95, l.p99);
            }
            if let Some(kb) = b.peak_rss_kb {
                println!("peak RSS {:.1} MiB", kb as f64 / 1024.0);
            }
        }
        Command::Stats => {
            let cfg = load_config(&cli.common)?;
            let s = cmd_stats(&cfg)?;
            println!(
                "{} passages, {} entities, {} nodes, {} edges, p95 degree entity {} doc {}",
                s.passages, s.entities, s.graph.nodes, s.graph.edges, s.graph.p95_entity_degree, s.graph.p95_doc_degree
            );
            let h = s.hub_coverage;
            println!(
                "top {:.1}% hubs remove {:.2}% of gold titles, affecting {:.2}% of queries",
                h.hub_top_pct * 100.0,
                h.gold_removed_pct,
                h.queries_affected_pct
            );
        }
        Command::Significance { baseline, preds, gold } => {
            let (queries, resamples, confidence, seed, out_dir) = match (&gold, &cli.common.config) {
                (Some(g), cfg_path) => {
                    let cfg = cfg_path.as_ref().map(|_| load_config(&cli.common)).transpose()?;
                    let ev = cfg.as_ref().map(|c| c.eval.clone()).unwrap_or_default();
                    (
                        read_gold(g)?,
                        ev.bootstrap_resamples,
                        ev.confidence,
                        cli.common.seed.or(cfg.as_ref().map(|c| c.rng_seed)).unwrap_or(42),
                        cli.common.out.clone().or(cfg.map(|c| c.out_dir)),
                    )
                }
                (None, Some(_)) => {
                    let cfg = load_config(&cli.common)?;
                    let (_, queries, _) = load_dataset(&cfg)?;
                    (
                        queries,
                        cfg.eval.bootstrap_resamples,
                        cfg.eval.confidence,
                        cfg.rng_seed,
                        Some(cfg.out_dir),
                    )
                }
                (None, None) => bail!("significance needs --gold or --config"),
            };
            let rows = cmd_significance(&label_predictions(&preds), &baseline, &queries, resamples, confidence, seed)?;
            println!("{}", sprig::commands::SIGNIFICANCE_HEADER);
            for r in &rows {
                println!("{}", r.tsv());
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                write_significance(&dir.join("significance.tsv"), &rows)?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run(Cli::parse())
}
