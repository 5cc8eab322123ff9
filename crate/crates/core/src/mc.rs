//! Reproducible parallel Monte Carlo.
//!
//! Run `i` of an experiment seeded with `seed` always draws from the ChaCha
//! stream `(seed, i)`, and per-run results are reduced in run-index order with
//! pairwise summation, so estimates are bit-identical for any worker count.

use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::SimRng;

/// Independent substream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monte Carlo point estimate with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    /// `None` when it cannot be estimated (a single run of a non-Bernoulli statistic).
    pub std_error: Option<f64>,
    pub runs: u64,
    /// Named diagnostics, e.g. truncation-bias bounds.
    pub extra: Vec<(String, f64)>,
}

impl MCEstimate {
    /// Sample mean and `s/√n`, both via pairwise summation.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n > 0, "an estimate needs at least one run");
        let mean = pairwise_sum(samples) / n as f64;
        let std_error = (n > 1).then(|| {
            let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        });
        MCEstimate {
            mean,
            std_error,
            runs: n as u64,
            extra: Vec::new(),
        }
    }

    /// Proportion estimate with the binomial standard error √(p̂(1 − p̂)/n).
    pub fn proportion(successes: u64, runs: u64) -> Self {
        assert!(runs > 0, "an estimate needs at least one run");
        let p = successes as f64 / runs as f64;
        MCEstimate {
            mean: p,
            std_error: Some((p * (1.0 - p) / runs as f64).sqrt()),
            runs,
            extra: Vec::new(),
        }
    }

    pub fn with_extra(mut self, name: impl Into<String>, value: f64) -> Self {
        self.extra.push((name.into(), value));
        self
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extra.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// (mean − target) / SE; `None` if the SE is undefined or zero.
    pub fn z_score(&self, target: f64) -> Option<f64> {
        self.std_error.filter(|se| *se > 0.0).map(|se| (self.mean - target) / se)
    }
}

/// Pairwise (cascade) summation; the split points depend only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Runs `run_fn(i, rng_i)` for `i in 0..runs` on `workers` threads and returns the results in
/// run order. The first failing run (lowest index) aborts the batch.
pub fn mc_collect<T, F>(runs: u64, seed: u64, workers: usize, run_fn: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> Result<T> + Sync,
{
    let one = |i: u64| -> Result<T> {
        let mut rng = substream(seed, i);
        run_fn(i, &mut rng).map_err(|e| Error::RunFailed {
            run: i,
            stream: i,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<T>> = if workers <= 1 {
        (0..runs).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| (0..runs).into_par_iter().map(one).collect())
    };
    results.into_iter().collect()
}

/// Scalar Monte Carlo: mean and standard error of `run_fn` over `runs` substreams.
pub fn mc_parallel<F>(run_fn: F, runs: u64, seed: u64, workers: usize) -> Result<MCEstimate>
where
    F: Fn(u64, &mut SimRng) -> Result<f64> + Sync,
{
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let samples = mc_collect(runs, seed, workers, run_fn)?;
    Ok(MCEstimate::from_samples(&samples))
}
