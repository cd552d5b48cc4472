//! Replica orchestration and the statistics used to judge simulations.
//!
//! Replica `i` of a run with base seed `s` always draws from
//! `RngSpec::new(s, i)`, and results are reduced in index order, so an
//! estimate does not depend on how many workers computed it.

use rayon::prelude::*;
use serde::Serialize;

use crate::env::RngSpec;
use crate::error::{param, Error, Result};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "GROWTHLAB_WORKERS";

/// Mean and standard error over independent replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    pub seed: u64,
}

impl Estimate {
    /// Sample mean and standard error (unbiased variance over n).
    pub fn from_samples(values: &[f64], seed: u64) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::InsufficientSamples { need: 1, got: 0 });
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Estimate { mean, stderr, reps: n, seed })
    }
}

/// Parses a worker count; `None` falls back to the number of available cores.
pub fn parse_workers(raw: Option<&str>) -> Result<usize> {
    match raw {
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(0) => Err(Error::Config(format!("{WORKERS_ENV} must be at least 1"))),
            Ok(n) => Ok(n),
            Err(_) => Err(Error::Config(format!("{WORKERS_ENV}={s:?} is not a positive integer"))),
        },
    }
}

/// Worker count from the environment.
pub fn workers_from_env() -> Result<usize> {
    parse_workers(std::env::var(WORKERS_ENV).ok().as_deref())
}

/// Runs `experiment` once per replica and returns the outputs in index order.
pub fn map_replicas_with<T, F>(experiment: F, reps: usize, base_seed: u64, workers: usize) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RngSpec) -> Result<T> + Sync,
{
    if reps == 0 {
        return Err(param("at least one replica is required"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|i| experiment(&RngSpec::new(base_seed, i as u64)))
            .collect()
    });
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| Error::Replica { index: index as u64, source: Box::new(e) }))
        .collect()
}

/// As [`map_replicas_with`], using the environment's worker count.
pub fn map_replicas<T, F>(experiment: F, reps: usize, base_seed: u64) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RngSpec) -> Result<T> + Sync,
{
    map_replicas_with(experiment, reps, base_seed, workers_from_env()?)
}

/// Scalar replicas in index order.
pub fn collect_replicas_with<F>(experiment: F, reps: usize, base_seed: u64, workers: usize) -> Result<Vec<f64>>
where
    F: Fn(&RngSpec) -> Result<f64> + Sync,
{
    map_replicas_with(experiment, reps, base_seed, workers)
}

/// As [`collect_replicas_with`], using the environment's worker count.
pub fn collect_replicas<F>(experiment: F, reps: usize, base_seed: u64) -> Result<Vec<f64>>
where
    F: Fn(&RngSpec) -> Result<f64> + Sync,
{
    collect_replicas_with(experiment, reps, base_seed, workers_from_env()?)
}

pub fn run_replicas_with<F>(experiment: F, reps: usize, base_seed: u64, workers: usize) -> Result<Estimate>
where
    F: Fn(&RngSpec) -> Result<f64> + Sync,
{
    let values = collect_replicas_with(experiment, reps, base_seed, workers)?;
    Estimate::from_samples(&values, base_seed)
}

/// Mean and standard error of `experiment` over `reps` replicas.
pub fn run_replicas<F>(experiment: F, reps: usize, base_seed: u64) -> Result<Estimate>
where
    F: Fn(&RngSpec) -> Result<f64> + Sync,
{
    run_replicas_with(experiment, reps, base_seed, workers_from_env()?)
}

/// Outcome of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSResult {
    pub statistic: f64,
    pub p_value: f64,
    /// sample size, or the effective size n·m/(n+m) rounded down for two samples
    pub n: usize,
}

/// Kolmogorov tail Q(λ) = P(K > λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series converges slowly here; the tail is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("samples contain NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// One-sample KS test against a continuous cdf.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KSResult> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::InsufficientSamples { need: 10, got: n });
    }
    let xs = sorted(samples)?;
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / nf).max((k + 1) as f64 / nf - f);
    }
    Ok(KSResult { statistic: d, p_value: p_value(d, nf), n })
}

/// Two-sample KS test.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<KSResult> {
    for s in [a, b] {
        if s.len() < 10 {
            return Err(Error::InsufficientSamples { need: 10, got: s.len() });
        }
    }
    let (xa, xb) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KSResult { statistic: d, p_value: p_value(d, n_eff), n: n_eff as usize })
}

/// Least-squares slope of log y against log x, with its R².
pub fn fit_power_exponent(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(param(format!("{} abscissae but {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientSamples { need: 5, got: xs.len() });
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("power fit needs positive finite data, found {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power fit needs at least two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, r2))
}
