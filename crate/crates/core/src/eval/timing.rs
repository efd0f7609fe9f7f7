//! Latency percentiles, peak memory, and index-time scaling sweeps.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

/// Nearest-rank percentile: the value at 1-based rank `ceil(p/100 · n)`.
fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = (pct * n as f64 / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn latency_stats(samples: &[f64]) -> Result<LatencyStats> {
    if samples.is_empty() {
        return Err(Error::param("latency_stats needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        p50: nearest_rank(&sorted, 50.0),
        p95: nearest_rank(&sorted, 95.0),
        p99: nearest_rank(&sorted, 99.0),
    })
}

/// Peak resident set size in KiB, from `/proc/self/status` where present.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse().ok())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("linear fit needs ≥2 paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("linear fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub size: usize,
    pub index_seconds: f64,
    pub query_seconds: f64,
    pub ms_per_doc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub fit: LinearFit,
}

impl ScalingReport {
    /// Largest over smallest per-document index time.
    pub fn per_doc_spread(&self) -> f64 {
        let (lo, hi) = self.rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
            (lo.min(r.ms_per_doc), hi.max(r.ms_per_doc))
        });
        hi / lo
    }
}

/// Times `run(size)` at each size, keeping the fastest of `trials` runs after
/// one untimed warm-up. Trials go round-robin over the sizes so a slow spell
/// on the host cannot land on every trial of one size. `run` returns
/// `(index_seconds, query_seconds)`; when it returns `None` for index time the
/// wall clock of the whole call is used.
pub fn scaling_sweep<F>(sizes: &[usize], trials: usize, mut run: F) -> Result<ScalingReport>
where
    F: FnMut(usize) -> Result<(Option<f64>, f64)>,
{
    if sizes.len() < 2 {
        return Err(Error::param("scaling sweep needs at least two sizes"));
    }
    if sizes.contains(&0) {
        return Err(Error::param("scaling sweep sizes must be positive"));
    }
    let trials = trials.max(1);
    run(sizes[0])?;
    let mut best = vec![(f64::INFINITY, f64::INFINITY); sizes.len()];
    for _ in 0..trials {
        for (slot, &size) in best.iter_mut().zip(sizes) {
            let start = Instant::now();
            let (index, query) = run(size)?;
            let index = index.unwrap_or_else(|| start.elapsed().as_secs_f64());
            *slot = (slot.0.min(index), slot.1.min(query));
        }
    }
    let rows: Vec<ScalingRow> = sizes
        .iter()
        .zip(&best)
        .map(|(&size, &(index_seconds, query_seconds))| ScalingRow {
            size,
            index_seconds,
            query_seconds,
            ms_per_doc: index_seconds * 1000.0 / size as f64,
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.index_seconds).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(ScalingReport { rows, fit })
}
