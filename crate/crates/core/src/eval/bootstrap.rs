//! Paired bootstrap over per-query metric differences.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub delta_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub resamples: usize,
    pub rng_seed: u64,
}

impl BootstrapResult {
    pub fn wtl(&self) -> String {
        format!("{}/{}/{}", self.wins, self.ties, self.losses)
    }

    pub fn excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// Resamples query indices with replacement and reports the percentile
/// interval of the mean of `a − b`. Both inputs are `(query id, value)` in
/// the same order; any id mismatch is an error.
pub fn paired_bootstrap(
    a: &[(String, f64)],
    b: &[(String, f64)],
    resamples: usize,
    confidence: f64,
    rng_seed: u64,
) -> Result<BootstrapResult> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param(format!("confidence must be in (0,1), got {confidence}")));
    }
    if resamples == 0 {
        return Err(Error::param("resamples must be ≥ 1"));
    }
    check_aligned(a, b)?;
    if a.is_empty() {
        return Err(Error::param("bootstrap needs at least one query"));
    }
    let deltas: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.1 - y.1).collect();
    let n = deltas.len();
    let (mut wins, mut ties, mut losses) = (0, 0, 0);
    for &d in &deltas {
        if d > 0.0 {
            wins += 1;
        } else if d < 0.0 {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    let delta_mean = deltas.iter().sum::<f64>() / n as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let sum: f64 = (0..n).map(|_| deltas[rng.random_range(0..n)]).sum();
            sum / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = ((1.0 - confidence) / 2.0 * resamples as f64).floor() as usize;
    let tail = tail.min((resamples - 1) / 2);
    // The percentile interval can miss the sample mean by rounding when
    // every resample is the same value; clamp so the interval contains it.
    let ci_low = means[tail].min(delta_mean);
    let ci_high = means[resamples - 1 - tail].max(delta_mean);
    Ok(BootstrapResult {
        delta_mean,
        ci_low,
        ci_high,
        wins,
        ties,
        losses,
        resamples,
        rng_seed,
    })
}

fn check_aligned(a: &[(String, f64)], b: &[(String, f64)]) -> Result<()> {
    let ids_a: BTreeSet<&str> = a.iter().map(|x| x.0.as_str()).collect();
    let ids_b: BTreeSet<&str> = b.iter().map(|x| x.0.as_str()).collect();
    if ids_a.len() != a.len() || ids_b.len() != b.len() {
        return Err(Error::Misaligned("duplicate query ids in bootstrap input".into()));
    }
    let only_a: Vec<&&str> = ids_a.difference(&ids_b).take(5).collect();
    let only_b: Vec<&&str> = ids_b.difference(&ids_a).take(5).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::Misaligned(format!(
            "query sets differ: only in a {only_a:?}, only in b {only_b:?}"
        )));
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| x.0 != y.0) {
        return Err(Error::Misaligned(format!(
            "query order differs: {} vs {}",
            x.0, y.0
        )));
    }
    Ok(())
}
