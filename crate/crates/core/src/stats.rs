//! Estimators, least squares, seed splitting and the replica pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Half-width of the normal-approximation 95% interval for the mean.
    pub ci95: f64,
    pub n: usize,
}

impl Estimate {
    pub fn stderr(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// Sample mean, variance and 95% half-width.
///
/// ```
/// let e = slfv::stats::estimate(&[0.0, 2.0]).unwrap();
/// assert_eq!((e.mean, e.variance), (1.0, 2.0));
/// ```
pub fn estimate(samples: &[f64]) -> Result<Estimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let variance = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Estimate {
        mean,
        variance,
        ci95: Z95 * (variance / n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Degenerate("least squares needs two or more paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("regression abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Two-proportion z statistic with pooled variance. Zero when both
/// proportions are degenerate and equal.
pub fn two_proportion_z(p1: f64, n1: usize, p2: f64, n2: usize) -> f64 {
    let pooled = (p1 * n1 as f64 + p2 * n2 as f64) / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var > 0.0 {
        (p1 - p2) / var.sqrt()
    } else if p1 == p2 {
        0.0
    } else {
        f64::INFINITY.copysign(p1 - p2)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replica `index` of the sub-experiment `stream` under `master`:
/// `splitmix(splitmix(splitmix(master) ^ stream) ^ index)`.
pub fn replica_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ stream) ^ index)
}

/// Stable tag for a named sub-experiment, used as the `stream` of
/// [`replica_seed`].
pub fn stream_tag(name: &str) -> u64 {
    // FNV-1a; stable across platforms and releases.
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Runs `f(index)` for every index in `0..reps` on `workers` threads and
/// returns results in index order. `workers == 1` runs inline.
pub fn map_replicas<T, F>(reps: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let run = |i: usize| f(i).map_err(|e| e.in_replica(i));
    if workers <= 1 {
        return (0..reps).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..reps).into_par_iter().map(run).collect())
}

/// Default worker count: all available cores.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
