//! The `growthlab` experiment driver.
//!
//! `growthlab <subcommand> --config <file> [--seed N] [--out DIR]`
//!
//! A run reads a TOML config, fills in the defaults of its subcommand,
//! validates every parameter, runs one experiment and writes CSV files plus a
//! `manifest.toml` into the output directory. The manifest echoes the
//! resolved config, so passing it back as `--config` replays the run
//! bit for bit. The worker count comes from `GROWTHLAB_WORKERS` and never
//! changes results.
//!
//! Exit codes: 0 when the run met its thresholds, 2 when it completed but
//! missed one, 1 on any error.
//!
//! ```toml
//! seed = 7
//! out = "runs/shape"
//!
//! [params]
//! c1 = 2.0
//! c2 = 1.0
//! n = 500
//! reps = 200
//! points = [[0.1, 1.0], [2.0, 1.0]]
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::env::{sample_exponential_grid, sample_loggamma_grid, Region, RngSpec, SpeedFunction, WeightGrid};
use crate::error::{Error, Result};
use crate::hydro::{
    closed_form_v, entropy_check, gamma_q, two_phase_shape, variational_v, weak_solution_residual, Bump, Profile,
    Quadrature, TwoPhaseProfile,
};
use crate::lattice::{corner_log_partition, corner_passage_time, zero_temperature_gap, GapRow, Origin};
use crate::loggamma::{burke_propagate, dual_free_energy, free_energy, point_rate, stationary_mean_log_z, LogGammaParams};
use crate::mc::{ks_test, map_replicas, run_replicas, workers_from_env, Estimate, KSResult};
use crate::tasep::{
    envelope_experiment, lpp_coupling_check, occupation_measure, simulate, DensityProfile, EnvelopeSetup,
    InitialData, TasepRun, Window,
};

/// Version tag of the manifest layout.
pub const MANIFEST_VERSION: u32 = 1;
/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// corner growth shape: Monte Carlo against the closed form
    Shape,
    /// stationary log-gamma polymer: mean identity and boundary marginals
    Burke,
    /// point-to-point rate function and its dual on a grid
    Rate,
    /// polymer free energy, Varadhan dual and zero-temperature table
    Polymer,
    /// one TASEP trajectory: snapshot and density histogram
    Tasep,
    /// envelope identity on shared clocks, with a negative control
    Envelope,
    /// TASEP passage times against corner last-passage times
    Couple,
    /// binned TASEP density against the two-phase profile
    Profile,
    /// entropy, flux and weak-solution checks of the two-phase profile
    Entropy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Shape => "shape",
            Command::Burke => "burke",
            Command::Rate => "rate",
            Command::Polymer => "polymer",
            Command::Tasep => "tasep",
            Command::Envelope => "envelope",
            Command::Couple => "couple",
            Command::Profile => "profile",
            Command::Entropy => "entropy",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "growthlab", version, about = "Polymer, last-passage and TASEP experiments")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML config, or the manifest of an earlier run
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Experiment parameters. Each subcommand reads the ones it needs and
/// rejects the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// macroscopic (x, y) probes for `shape`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    /// total width of the band around each density jump left out of the comparison
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clock_offset: Option<i64>,
}

/// A run configuration as read from TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: Option<f64>) -> Result<f64> {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(x) => Err(config_err(format!("{name} must be positive and finite, got {x}"))),
        None => Err(config_err(format!("{name} is required"))),
    }
}

fn unit_interval(name: &str, v: Option<f64>) -> Result<f64> {
    match v {
        Some(x) if (0.0..=1.0).contains(&x) => Ok(x),
        Some(x) => Err(config_err(format!("{name} must lie in [0, 1], got {x}"))),
        None => Err(config_err(format!("{name} is required"))),
    }
}

fn count<T: Copy + Into<u64>>(name: &str, v: Option<T>) -> Result<T> {
    match v {
        Some(x) if x.into() >= 1 => Ok(x),
        Some(_) => Err(config_err(format!("{name} must be at least 1"))),
        None => Err(config_err(format!("{name} is required"))),
    }
}

fn reps_of(p: &Params) -> Result<usize> {
    match p.reps {
        Some(r) if r >= 1 => Ok(r),
        Some(_) => Err(config_err("reps must be at least 1")),
        None => Err(config_err("reps is required")),
    }
}

fn reject_unused(p: &Params, cmd: Command, used: &[&str]) -> Result<()> {
    let table = toml::Value::try_from(p).map_err(|e| config_err(e.to_string()))?;
    if let toml::Value::Table(t) = table {
        if let Some(k) = t.keys().find(|k| !used.contains(&k.as_str())) {
            return Err(config_err(format!("parameter `{k}` is not used by `{}`", cmd.name())));
        }
    }
    Ok(())
}

impl RunConfig {
    /// Parses a config file, or the `config` table of a run manifest.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        let body = match table.get("config") {
            Some(toml::Value::Table(inner)) if table.contains_key("manifest_version") => inner.clone(),
            _ => table,
        };
        toml::Value::Table(body).try_into().map_err(|e: toml::de::Error| config_err(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Applies command-line overrides and the subcommand's defaults, then
    /// validates. The result holds every value the run will use.
    pub fn resolve(mut self, cmd: Command, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(sc) = self.subcommand {
            if sc != cmd {
                return Err(config_err(format!("config is for `{}`, not `{}`", sc.name(), cmd.name())));
            }
        }
        self.subcommand = Some(cmd);
        self.seed = Some(seed.or(self.seed).unwrap_or(DEFAULT_SEED));
        self.out = Some(out.or(self.out).unwrap_or_else(|| PathBuf::from("growthlab-out").join(cmd.name())));
        let p = &mut self.params;
        macro_rules! default {
            ($($field:ident = $value:expr),* $(,)?) => {{ $( if p.$field.is_none() { p.$field = Some($value); } )* }};
        }
        match cmd {
            Command::Shape => {
                default!(c1 = 2.0, c2 = 1.0, n = 500, reps = 200, tol = 0.05);
                default!(points = vec![[0.02, 1.0], [0.1, 1.0], [2.0, 1.0]]);
            }
            Command::Burke => {
                default!(mu = 2.0, theta = 0.8, n = 200, reps = 500);
                default!(m = p.n.unwrap());
            }
            Command::Rate => {
                default!(mu = 2.0, s = 1.0, t = 1.0, grid = 61);
                let (s, t, mu) = (positive("s", p.s)?, positive("t", p.t)?, positive("mu", p.mu)?);
                let p0 = free_energy(s, t, mu).map_err(|e| config_err(e.to_string()))?;
                default!(r_min = p0 - 1.0, r_max = p0 + 2.0);
            }
            Command::Polymer => default!(mu = 2.0, s = 1.0, t = 1.0, n = 400, reps = 50, tol = 0.05),
            Command::Tasep => default!(c1 = 1.0, c2 = 1.0, n = 200, t = 1.0, bin_width = 0.1),
            Command::Envelope => {
                let d = EnvelopeSetup::default();
                default!(sites = d.sites, horizon = d.horizon, samples = d.samples, clock_offset = 0);
            }
            Command::Couple => default!(m = 8, n = 8, reps = 5000),
            Command::Profile => {
                default!(c1 = 1.0, c2 = 0.5, rho = 0.3, t = 1.0, n = 2000, reps = 16);
                default!(bin_width = 0.1, exclusion = 0.05, tol = 0.05);
            }
            Command::Entropy => default!(c1 = 1.0, c2 = 0.5, rho = 0.3, t = 1.0, tol = 1e-3),
        }
        self.validate(cmd)?;
        Ok(self)
    }

    fn validate(&self, cmd: Command) -> Result<()> {
        let p = &self.params;
        let used: &[&str] = match cmd {
            Command::Shape => {
                positive("c1", p.c1)?;
                positive("c2", p.c2)?;
                count("n", p.n)?;
                reps_of(p)?;
                positive("tol", p.tol)?;
                let pts = p.points.as_deref().unwrap_or_default();
                if pts.is_empty() {
                    return Err(config_err("points must hold at least one (x, y) pair"));
                }
                if let Some(q) = pts.iter().find(|q| !(q[0] >= 0.0 && q[1] >= 0.0 && q[0] + q[1] > 0.0)) {
                    return Err(config_err(format!("probe {q:?} must be nonnegative and not the origin")));
                }
                &["c1", "c2", "n", "reps", "tol", "points"]
            }
            Command::Burke => {
                LogGammaParams::new(positive("mu", p.mu)?, positive("theta", p.theta)?)
                    .map_err(|e| config_err(e.to_string()))?;
                let (m, n) = (count("m", p.m)?, count("n", p.n)?);
                if m < 10 || n < 10 {
                    return Err(config_err("burke needs m, n ≥ 10 for the marginal tests"));
                }
                reps_of(p)?;
                &["mu", "theta", "m", "n", "reps"]
            }
            Command::Rate => {
                positive("mu", p.mu)?;
                positive("s", p.s)?;
                positive("t", p.t)?;
                let (lo, hi) = (p.r_min.unwrap(), p.r_max.unwrap());
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(config_err(format!("need r_min < r_max, got [{lo}, {hi}]")));
                }
                if count("grid", p.grid.map(|g| g as u64))? < 2 {
                    return Err(config_err("grid needs at least two points"));
                }
                &["mu", "s", "t", "r_min", "r_max", "grid"]
            }
            Command::Polymer => {
                let mu = positive("mu", p.mu)?;
                positive("s", p.s)?;
                positive("t", p.t)?;
                count("n", p.n)?;
                reps_of(p)?;
                positive("tol", p.tol)?;
                if let Some(xi) = p.xi {
                    if !(xi > 0.0 && xi < mu) {
                        return Err(config_err(format!("xi must lie in (0, mu), got {xi}")));
                    }
                }
                if let Some(b) = &p.betas {
                    if b.is_empty() || b.iter().any(|x| !(*x > 0.0)) || b.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(config_err("betas must be positive and strictly increasing"));
                    }
                    if let Some(m) = p.m {
                        count("m", Some(m))?;
                    }
                } else if p.m.is_some() {
                    return Err(config_err("m sets the zero-temperature grid and needs betas"));
                }
                &["mu", "s", "t", "n", "reps", "tol", "xi", "betas", "m"]
            }
            Command::Tasep => {
                positive("c1", p.c1)?;
                positive("c2", p.c2)?;
                count("n", p.n)?;
                positive("t", p.t)?;
                positive("bin_width", p.bin_width)?;
                if p.rho.is_some() {
                    unit_interval("rho", p.rho)?;
                }
                &["c1", "c2", "n", "t", "bin_width", "rho"]
            }
            Command::Envelope => {
                count("sites", p.sites.map(|s| s as u64))?;
                count("samples", p.samples.map(|s| s as u64))?;
                if !(p.horizon.unwrap() >= 0.0) {
                    return Err(config_err("horizon must be nonnegative"));
                }
                &["sites", "horizon", "samples", "clock_offset"]
            }
            Command::Couple => {
                count("m", p.m)?;
                count("n", p.n)?;
                if reps_of(p)? < 10 {
                    return Err(config_err("couple needs at least 10 replicas for the KS test"));
                }
                &["m", "n", "reps"]
            }
            Command::Profile => {
                positive("c1", p.c1)?;
                positive("c2", p.c2)?;
                unit_interval("rho", p.rho)?;
                positive("t", p.t)?;
                count("n", p.n)?;
                reps_of(p)?;
                positive("bin_width", p.bin_width)?;
                positive("tol", p.tol)?;
                if !(p.exclusion.unwrap() >= 0.0) {
                    return Err(config_err("exclusion must be nonnegative"));
                }
                &["c1", "c2", "rho", "t", "n", "reps", "bin_width", "exclusion", "tol"]
            }
            Command::Entropy => {
                positive("c1", p.c1)?;
                positive("c2", p.c2)?;
                unit_interval("rho", p.rho)?;
                positive("t", p.t)?;
                positive("tol", p.tol)?;
                &["c1", "c2", "rho", "t", "tol"]
            }
        };
        reject_unused(p, cmd, used)
    }
}

/// `git hash-object` of a byte string: SHA-1 over "blob <len>\0" + bytes.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub git_blob_sha1: String,
}

/// Record of one run; its `config` table replays the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub subcommand: Command,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub passed: bool,
    pub summary: Vec<String>,
    pub outputs: Vec<String>,
    pub inputs: Vec<InputRecord>,
    pub config: RunConfig,
}

/// What a subcommand produced: named files, summary lines and the verdict.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
    pub passed: bool,
}

struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, cells: &[String]) {
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Weights Exp(c(i − j)) on [0, m] × [0, n]: the two-phase corner growth
/// environment, rate c1 above the diagonal and c2 below it.
pub fn two_phase_corner_grid(c: &SpeedFunction, m: usize, n: usize, rng: RngSpec) -> Result<WeightGrid> {
    let region = Region::Rectangle { m, n };
    let unit = sample_exponential_grid(&SpeedFunction::constant(1.0)?, 1, 0, region.clone(), rng);
    WeightGrid::from_fn(region, |i, j| unit.get(i, j).unwrap() / c.at((i - j) as f64))
}

/// n⁻¹ G(⌊nx⌋, ⌊ny⌋) over independent two-phase environments.
pub fn corner_shape_estimate(c1: f64, c2: f64, x: f64, y: f64, n: u64, reps: usize, seed: u64) -> Result<Estimate> {
    let speed = SpeedFunction::two_phase(c1, c2)?;
    let (m, k) = ((x * n as f64).floor() as usize, (y * n as f64).floor() as usize);
    run_replicas(
        |spec| Ok(corner_passage_time(&two_phase_corner_grid(&speed, m, k, *spec)?, Origin::Include)? / n as f64),
        reps,
        seed,
    )
}

/// Limit shape of the two-phase corner model at (x, y).
pub fn corner_shape_limit(c1: f64, c2: f64, x: f64, y: f64) -> Result<f64> {
    if c1 >= c2 {
        two_phase_shape(x, y, c1, c2)
    } else {
        gamma_q(x - y, y, 0.0, &SpeedFunction::two_phase(c1, c2)?)
    }
}

/// Outcome of the stationary log-gamma experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BurkeSummary {
    pub log_z: Estimate,
    pub expected: f64,
    /// U(i, n) along the top row of the first replica against 1/Gamma(θ)
    pub ks_top_row: KSResult,
    /// V(m, j) along the right column of the first replica against 1/Gamma(μ−θ)
    pub ks_right_column: KSResult,
}

impl BurkeSummary {
    pub fn gap_in_stderrs(&self) -> f64 {
        (self.log_z.mean - self.expected).abs() / self.log_z.stderr
    }

    pub fn passed(&self) -> bool {
        self.gap_in_stderrs() <= 3.0 && self.ks_top_row.p_value > 0.01 && self.ks_right_column.p_value > 0.01
    }
}

fn inverse_gamma_cdf(shape: f64) -> Result<impl Fn(f64) -> f64> {
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok(move |u: f64| if u <= 0.0 { 0.0 } else { 1.0 - g.cdf(1.0 / u) })
}

pub fn burke_experiment(mu: f64, theta: f64, m: usize, n: usize, reps: usize, seed: u64) -> Result<BurkeSummary> {
    let params = LogGammaParams::new(mu, theta)?;
    let out = map_replicas(
        |spec| {
            let g = sample_loggamma_grid(mu, theta, m, n, true, *spec)?;
            let log_z = corner_log_partition(&g, 1.0, Origin::Exclude)?;
            if spec.stream_id != 0 {
                return Ok((log_z, Vec::new(), Vec::new()));
            }
            let w = |i: usize, j: usize| g.get(i as i64, j as i64).unwrap().exp();
            let u_row: Vec<f64> = (1..=m).map(|i| w(i, 0)).collect();
            let v_col: Vec<f64> = (1..=n).map(|j| w(0, j)).collect();
            let bulk: Vec<f64> = (1..=m).flat_map(|i| (1..=n).map(move |j| (i, j))).map(|(i, j)| w(i, j)).collect();
            let f = burke_propagate(&u_row, &v_col, &bulk)?;
            let top = (1..=m as i64).map(|i| f.u(i, n as i64).unwrap()).collect();
            let right = (1..=n as i64).map(|j| f.v(m as i64, j).unwrap()).collect();
            Ok((log_z, top, right))
        },
        reps,
        seed,
    )?;
    let values: Vec<f64> = out.iter().map(|o| o.0).collect();
    Ok(BurkeSummary {
        log_z: Estimate::from_samples(&values, seed)?,
        expected: stationary_mean_log_z(m, n, &params),
        ks_top_row: ks_test(&out[0].1, inverse_gamma_cdf(theta)?)?,
        ks_right_column: ks_test(&out[0].2, inverse_gamma_cdf(mu - theta)?)?,
    })
}

/// log Z of the bulk log-gamma polymer to (⌊sn⌋, ⌊tn⌋), one value per replica.
pub fn polymer_log_z(mu: f64, s: f64, t: f64, n: u64, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let (m, k) = ((s * n as f64).floor() as usize, (t * n as f64).floor() as usize);
    map_replicas(
        |spec| corner_log_partition(&sample_loggamma_grid(mu, 0.5 * mu, m, k, false, *spec)?, 1.0, Origin::Exclude),
        reps,
        seed,
    )
}

/// n⁻¹ log of the sample mean of Z^ξ, from samples of log Z.
pub fn varadhan_estimate(log_z: &[f64], xi: f64, n: u64) -> f64 {
    let top = log_z.iter().map(|l| xi * l).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_z.iter().map(|l| (xi * l - top).exp()).sum();
    (top + (sum / log_z.len() as f64).ln()) / n as f64
}

/// One bin of the density comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBin {
    pub lo: f64,
    pub hi: f64,
    pub empirical: f64,
    pub closed_form: f64,
    /// within half the exclusion width of a density jump
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileComparison {
    pub bins: Vec<ProfileBin>,
    /// largest |empirical − closed form| over bins that are not excluded
    pub sup_error: f64,
}

/// Density comparison set-up: two-phase TASEP from Bernoulli(ρ) data at scale n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSetup {
    pub c1: f64,
    pub c2: f64,
    pub rho: f64,
    pub t: f64,
    pub n: u64,
    pub reps: usize,
    pub bin_width: f64,
    pub exclusion: f64,
}

impl ProfileSetup {
    /// Bins cover [−L, L] with L the light-cone half width plus a margin.
    pub fn half_range(&self) -> f64 {
        let l = self.c1.max(self.c2) * self.t + 0.2;
        (l / self.bin_width).ceil() * self.bin_width
    }
}

/// Averages binned TASEP densities over replicas and compares them with the
/// bin averages of the closed-form profile.
pub fn compare_profile(setup: &ProfileSetup, seed: u64) -> Result<ProfileComparison> {
    let profile = TwoPhaseProfile::new(setup.rho, setup.c1, setup.c2)?;
    let speed = SpeedFunction::two_phase(setup.c1, setup.c2)?;
    let l = setup.half_range();
    let nb = (2.0 * l / setup.bin_width).round() as usize;
    let edges: Vec<f64> = (0..=nb).map(|k| -l + k as f64 * setup.bin_width).collect();
    let nf = setup.n as f64;
    let window = Window::new((-l * nf).floor() as i64 - 1, (l * nf).ceil() as i64 + 1)?;
    let run = TasepRun {
        speed,
        n: setup.n,
        initial: InitialData::Bernoulli(setup.rho),
        horizon: setup.t * nf,
        window,
    };
    let per_rep = map_replicas(
        |spec| {
            let traj = simulate(&run, *spec)?;
            edges
                .windows(2)
                .map(|w| Ok(occupation_measure(&traj, w[0], w[1], setup.t, setup.n)? / (w[1] - w[0])))
                .collect::<Result<Vec<f64>>>()
        },
        setup.reps,
        seed,
    )?;
    let jumps = profile.jumps(setup.t);
    let mut bins = Vec::with_capacity(nb);
    let mut sup: f64 = 0.0;
    for (k, w) in edges.windows(2).enumerate() {
        let empirical = per_rep.iter().map(|r| r[k]).sum::<f64>() / per_rep.len() as f64;
        let q = 400;
        let h = (w[1] - w[0]) / q as f64;
        let closed_form = (0..q).map(|j| profile.density(w[0] + (j as f64 + 0.5) * h, setup.t)).sum::<f64>() / q as f64;
        let half = 0.5 * setup.exclusion;
        let excluded = jumps.iter().any(|&j| w[1] > j - half && w[0] < j + half);
        if !excluded {
            sup = sup.max((empirical - closed_form).abs());
        }
        bins.push(ProfileBin { lo: w[0], hi: w[1], empirical, closed_form, excluded });
    }
    Ok(ProfileComparison { bins, sup_error: sup })
}

/// Test functions scaled to the time t used by the weak-formulation check.
pub fn standard_bumps(t: f64) -> Result<Vec<Bump>> {
    [(0.0, 0.5, 0.6, 0.5), (0.2, 0.8, 0.3, 0.3), (-0.1, 0.3, 0.5, 0.4)]
        .iter()
        .map(|&(x0, t0, rx, rt)| Bump::new(x0 * t, t0 * t, rx * t, rt * t))
        .collect()
}

/// Largest |numeric v − closed-form v| over a 20 × 5 grid of (x, t) in
/// [−1.5, 1.5] × [0.2, 1].
pub fn variational_gap(rho: f64, c1: f64, c2: f64) -> Result<f64> {
    let rho0 = DensityProfile::new(vec![], vec![rho])?;
    let speed = SpeedFunction::two_phase(c1, c2)?;
    let mut worst: f64 = 0.0;
    for it in 0..5 {
        let t = 0.2 + 0.2 * it as f64;
        for ix in 0..20 {
            let x = -1.5 + 3.0 * ix as f64 / 19.0;
            let v = variational_v(x, t, &rho0, &speed)?;
            worst = worst.max((v - closed_form_v(x, t, rho, c1, c2)?).abs());
        }
    }
    Ok(worst)
}

fn cmd_shape(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let (c1, c2, n, reps, tol) = (p.c1.unwrap(), p.c2.unwrap(), p.n.unwrap(), p.reps.unwrap(), p.tol.unwrap());
    let mut csv = Csv::new(&["x", "y", "n", "estimate", "stderr", "closed_form", "abs_err"]);
    let mut rep = Report { passed: true, ..Default::default() };
    // every probe reuses the same replica streams
    for &[x, y] in p.points.as_ref().unwrap() {
        let est = corner_shape_estimate(c1, c2, x, y, n, reps, cfg.seed.unwrap())?;
        let limit = corner_shape_limit(c1, c2, x, y)?;
        let err = (est.mean - limit).abs();
        let ok = err <= tol * limit;
        rep.passed &= ok;
        csv.row(&[num(x), num(y), n.to_string(), num(est.mean), num(est.stderr), num(limit), num(err)]);
        rep.summary.push(format!(
            "({x}, {y}): estimate {:.5} ± {:.5}, limit {limit:.5}, relative error {:.4}: {}",
            est.mean,
            est.stderr,
            err / limit,
            verdict(ok)
        ));
    }
    rep.files.push(("shape.csv".into(), csv.0));
    Ok(rep)
}

fn cmd_burke(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let (mu, theta) = (p.mu.unwrap(), p.theta.unwrap());
    let (m, n) = (p.m.unwrap() as usize, p.n.unwrap() as usize);
    let b = burke_experiment(mu, theta, m, n, p.reps.unwrap(), cfg.seed.unwrap())?;
    let mut csv = Csv::new(&["quantity", "value"]);
    for (k, v) in [
        ("mean_log_z", b.log_z.mean),
        ("stderr", b.log_z.stderr),
        ("expected", b.expected),
        ("gap_in_stderrs", b.gap_in_stderrs()),
        ("ks_top_row_statistic", b.ks_top_row.statistic),
        ("ks_top_row_p", b.ks_top_row.p_value),
        ("ks_right_column_statistic", b.ks_right_column.statistic),
        ("ks_right_column_p", b.ks_right_column.p_value),
    ] {
        csv.row(&[k.into(), num(v)]);
    }
    let summary = vec![
        format!(
            "mean log Z {:.4} ± {:.4} vs {:.4} ({:.2} stderr): {}",
            b.log_z.mean,
            b.log_z.stderr,
            b.expected,
            b.gap_in_stderrs(),
            verdict(b.gap_in_stderrs() <= 3.0)
        ),
        format!("top-row U marginal KS p = {:.4}: {}", b.ks_top_row.p_value, verdict(b.ks_top_row.p_value > 0.01)),
        format!(
            "right-column V marginal KS p = {:.4}: {}",
            b.ks_right_column.p_value,
            verdict(b.ks_right_column.p_value > 0.01)
        ),
    ];
    Ok(Report { files: vec![("burke.csv".into(), csv.0)], summary, passed: b.passed() })
}

fn cmd_rate(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let (mu, s, t) = (p.mu.unwrap(), p.s.unwrap(), p.t.unwrap());
    let (lo, hi, k) = (p.r_min.unwrap(), p.r_max.unwrap(), p.grid.unwrap());
    let p0 = free_energy(s, t, mu)?;
    let mut rs: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    if (lo..=hi).contains(&p0) && !rs.contains(&p0) {
        rs.push(p0);
        rs.sort_by(f64::total_cmp);
    }
    let mut rate = Csv::new(&["s", "t", "r", "J", "p_mu", "mu"]);
    let mut ok = true;
    for &r in &rs {
        let j = point_rate(s, t, r, mu)?;
        ok &= j >= -1e-9 && (r > p0 || j.abs() <= 1e-9);
        rate.row(&[num(s), num(t), num(r), num(j), num(p0), num(mu)]);
    }
    let mut dual = Csv::new(&["s", "t", "xi", "J_star"]);
    for i in 1..=k {
        let xi = 0.9 * mu * i as f64 / k as f64;
        dual.row(&[num(s), num(t), num(xi), num(dual_free_energy(s, t, xi, mu)?)]);
    }
    let summary = vec![
        format!("free energy p = {p0:.10}"),
        format!("J ≥ 0 on the grid and J = 0 for r ≤ p: {}", verdict(ok)),
    ];
    Ok(Report { files: vec![("rate.csv".into(), rate.0), ("dual.csv".into(), dual.0)], summary, passed: ok })
}

fn cmd_polymer(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let (mu, s, t, n, reps, tol) = (p.mu.unwrap(), p.s.unwrap(), p.t.unwrap(), p.n.unwrap(), p.reps.unwrap(), p.tol.unwrap());
    let seed = cfg.seed.unwrap();
    let lz = polymer_log_z(mu, s, t, n, reps, seed)?;
    let scaled: Vec<f64> = lz.iter().map(|v| v / n as f64).collect();
    let est = Estimate::from_samples(&scaled, seed)?;
    let p0 = free_energy(s, t, mu)?;
    let fe_ok = (est.mean - p0).abs() <= tol;
    let mut rep = Report { passed: fe_ok, ..Default::default() };
    let mut fe = Csv::new(&["s", "t", "n", "reps", "estimate", "stderr", "p_mu", "abs_err"]);
    fe.row(&[num(s), num(t), n.to_string(), reps.to_string(), num(est.mean), num(est.stderr), num(p0), num((est.mean - p0).abs())]);
    rep.files.push(("free_energy.csv".into(), fe.0));
    rep.summary.push(format!("n⁻¹ log Z = {:.5} ± {:.5} vs p = {p0:.5}: {}", est.mean, est.stderr, verdict(fe_ok)));
    if let Some(xi) = p.xi {
        let v = varadhan_estimate(&lz, xi, n);
        let target = dual_free_energy(s, t, xi, mu)?;
        let ok = (v - target).abs() <= 0.1;
        rep.passed &= ok;
        let mut c = Csv::new(&["xi", "n", "reps", "estimate", "J_star", "abs_err"]);
        c.row(&[num(xi), n.to_string(), reps.to_string(), num(v), num(target), num((v - target).abs())]);
        rep.files.push(("varadhan.csv".into(), c.0));
        rep.summary.push(format!("n⁻¹ log E Z^ξ = {v:.5} vs J*(ξ) = {target:.5}: {}", verdict(ok)));
    }
    if let Some(betas) = &p.betas {
        let m = p.m.unwrap_or(6) as usize;
        let grid = sample_exponential_grid(
            &SpeedFunction::constant(1.0)?,
            1,
            0,
            Region::Rectangle { m, n: m },
            RngSpec::new(seed, 0).substream(7),
        );
        let rows = zero_temperature_gap(&grid, (m as i64, m as i64), betas, Origin::Exclude)?;
        let ok = zero_temperature_ok(&rows);
        rep.passed &= ok;
        let mut c = Csv::new(&["beta", "gap", "bound", "q_max"]);
        for r in &rows {
            c.row(&[num(r.beta), num(r.gap), num(r.bound), num(r.q_max)]);
        }
        rep.files.push(("zero_temperature.csv".into(), c.0));
        rep.summary.push(format!("zero-temperature sandwich and monotone maximal-path mass: {}", verdict(ok)));
    }
    Ok(rep)
}

/// Sandwich 0 ≤ gap ≤ bound at every β, nondecreasing mass of the maximal
/// path, and mass ≥ 0.999 once β ≥ 64.
pub fn zero_temperature_ok(rows: &[GapRow]) -> bool {
    let sandwich = rows.iter().all(|r| r.gap >= -1e-12 && r.gap <= r.bound + 1e-12);
    let monotone = rows.windows(2).all(|w| w[1].q_max >= w[0].q_max - 1e-12);
    let cold = rows.iter().filter(|r| r.beta >= 64.0).all(|r| r.q_max >= 0.999);
    sandwich && monotone && cold
}

fn cmd_tasep(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let (c1, c2, n, t, w) = (p.c1.unwrap(), p.c2.unwrap(), p.n.unwrap(), p.t.unwrap(), p.bin_width.unwrap());
    let l = ((c1.max(c2) * t + 0.2) / w).ceil() * w;
    let nf = n as f64;
    let window = Window::new((-l * nf).floor() as i64 - 1, (l * nf).ceil() as i64 + 1)?;
    let initial = p.rho.map_or(InitialData::Step, InitialData::Bernoulli);
    let run = TasepRun { speed: SpeedFunction::two_phase(c1, c2)?, n, initial, horizon: t * nf, window };
    let traj = simulate(&run, RngSpec::new(cfg.seed.unwrap(), 0))?;
    let mut snap = Csv::new(&["t", "i", "eta", "z", "J"]);
    for (time, i, eta, z, j) in traj.snapshot(t * nf)? {
        snap.row(&[num(time), i.to_string(), eta.to_string(), z.to_string(), j.to_string()]);
    }
    let mut hist = Csv::new(&["bin_lo", "bin_hi", "density"]);
    let nb = (2.0 * l / w).round() as usize;
    for k in 0..nb {
        let (a, b) = (-l + k as f64 * w, -l + (k + 1) as f64 * w);
        hist.row(&[num(a), num(b), num(occupation_measure(&traj, a, b, t, n)? / (b - a))]);
    }
    let summary = vec![format!("{} clock rings, {} jumps in the window", traj.ring_count(), traj.jump_count())];
    Ok(Report { files: vec![("snapshot.csv".into(), snap.0), ("density.csv".into(), hist.0)], summary, passed: true })
}

fn cmd_envelope(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let setup = EnvelopeSetup {
        sites: p.sites.unwrap(),
        horizon: p.horizon.unwrap(),
        samples: p.samples.unwrap(),
        clock_offset: p.clock_offset.unwrap(),
        ..EnvelopeSetup::default()
    };
    let spec = RngSpec::new(cfg.seed.unwrap(), 0);
    let main = envelope_experiment(&setup, spec)?;
    let control_offset = if setup.clock_offset == 0 { 1 } else { 0 };
    let control = envelope_experiment(&EnvelopeSetup { clock_offset: control_offset, ..setup.clone() }, spec)?;
    let mut csv = Csv::new(&["site", "time", "z", "sup", "argmax"]);
    for v in &main.violations {
        csv.row(&[v.site.to_string(), num(v.time), v.z.to_string(), v.sup.to_string(), v.argmax.to_string()]);
    }
    let shared = setup.clock_offset == 0;
    let (ok_main, ok_control) = if shared { (main.passed(), !control.passed()) } else { (!main.passed(), control.passed()) };
    let summary = vec![
        format!("{} comparisons, {} particle jumps, {} uncertified", main.checked, main.events, main.uncertified),
        format!("exact equality: {}", verdict(main.passed())),
        format!(
            "negative control (clock offset {control_offset}): {} violations, {}",
            control.violations.len(),
            if ok_control { "detected" } else { "NOT detected" }
        ),
    ];
    Ok(Report { files: vec![("violations.csv".into(), csv.0)], summary, passed: ok_main && ok_control })
}

fn cmd_couple(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let (m, n) = (p.m.unwrap() as usize, p.n.unwrap() as usize);
    let r = lpp_coupling_check(m, n, p.reps.unwrap(), RngSpec::new(cfg.seed.unwrap(), 0))?;
    let ok = r.ks.p_value > 0.01 && r.mean_gap_in_stderrs() <= 3.0;
    let mut csv = Csv::new(&["m", "n", "lpp_mean", "lpp_stderr", "tasep_mean", "tasep_stderr", "ks_statistic", "ks_p", "gap_in_stderrs"]);
    csv.row(&[
        m.to_string(),
        n.to_string(),
        num(r.lpp.mean),
        num(r.lpp.stderr),
        num(r.tasep.mean),
        num(r.tasep.stderr),
        num(r.ks.statistic),
        num(r.ks.p_value),
        num(r.mean_gap_in_stderrs()),
    ]);
    let summary = vec![format!(
        "G({m},{n}) {:.4} vs TASEP {:.4} ({:.2} stderr), KS p = {:.4}: {}",
        r.lpp.mean,
        r.tasep.mean,
        r.mean_gap_in_stderrs(),
        r.ks.p_value,
        verdict(ok)
    )];
    Ok(Report { files: vec![("couple.csv".into(), csv.0)], summary, passed: ok })
}

fn cmd_profile(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let setup = ProfileSetup {
        c1: p.c1.unwrap(),
        c2: p.c2.unwrap(),
        rho: p.rho.unwrap(),
        t: p.t.unwrap(),
        n: p.n.unwrap(),
        reps: p.reps.unwrap(),
        bin_width: p.bin_width.unwrap(),
        exclusion: p.exclusion.unwrap(),
    };
    let cmp = compare_profile(&setup, cfg.seed.unwrap())?;
    let prof = TwoPhaseProfile::new(setup.rho, setup.c1, setup.c2)?;
    let l = setup.half_range();
    let mut curve = Csv::new(&["x", "t", "rho_closed_form"]);
    for k in 0..=600 {
        let x = -l + 2.0 * l * k as f64 / 600.0;
        curve.row(&[num(x), num(setup.t), num(prof.density(x, setup.t))]);
    }
    let mut bins = Csv::new(&["bin_lo", "bin_hi", "empirical", "closed_form", "abs_err", "excluded"]);
    for b in &cmp.bins {
        bins.row(&[num(b.lo), num(b.hi), num(b.empirical), num(b.closed_form), num((b.empirical - b.closed_form).abs()), b.excluded.to_string()]);
    }
    let ok = cmp.sup_error <= p.tol.unwrap();
    let summary = vec![format!("max binned |empirical − closed form| outside exclusion zones = {:.4}: {}", cmp.sup_error, verdict(ok))];
    Ok(Report { files: vec![("profile.csv".into(), curve.0), ("bins.csv".into(), bins.0)], summary, passed: ok })
}

fn cmd_entropy(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let (c1, c2, rho, t, tol) = (p.c1.unwrap(), p.c2.unwrap(), p.rho.unwrap(), p.t.unwrap(), p.tol.unwrap());
    let prof = TwoPhaseProfile::new(rho, c1, c2)?;
    let e = entropy_check(&prof, c1, c2, t);
    let weak = weak_solution_residual(&prof, c1, c2, &standard_bumps(t)?, &Quadrature::default())?;
    let gap = variational_gap(rho, c1, c2)?;
    let checks = [
        ("interior entropy condition", e.interior, String::new()),
        ("boundary entropy condition", e.boundary, format!("rho(0-) = {:.6}, rho(0+) = {:.6}", e.left_limit, e.right_limit)),
        ("flux matching at x = 0", e.flux_residual <= 1e-10, format!("residual = {:.3e}", e.flux_residual)),
        ("weak formulation", weak <= tol, format!("residual = {weak:.3e}")),
        ("variational consistency", gap <= tol, format!("max |v - closed form| = {gap:.3e}")),
    ];
    let mut text = String::new();
    writeln!(text, "c1 = {c1}\nc2 = {c2}\nrho = {rho}\nt = {t}").unwrap();
    let mut summary = Vec::new();
    for (name, ok, detail) in &checks {
        let line = if detail.is_empty() { format!("{name}: {}", verdict(*ok)) } else { format!("{name}: {} ({detail})", verdict(*ok)) };
        writeln!(text, "{line}").unwrap();
        summary.push(line);
    }
    let mut shocks = Csv::new(&["x", "left", "right"]);
    for j in &e.shocks {
        shocks.row(&[num(j.x), num(j.left), num(j.right)]);
    }
    let passed = checks.iter().all(|c| c.1);
    Ok(Report { files: vec![("entropy.txt".into(), text), ("shocks.csv".into(), shocks.0)], summary, passed })
}

/// Runs a resolved config.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Report> {
    match cmd {
        Command::Shape => cmd_shape(cfg),
        Command::Burke => cmd_burke(cfg),
        Command::Rate => cmd_rate(cfg),
        Command::Polymer => cmd_polymer(cfg),
        Command::Tasep => cmd_tasep(cfg),
        Command::Envelope => cmd_envelope(cfg),
        Command::Couple => cmd_couple(cfg),
        Command::Profile => cmd_profile(cfg),
        Command::Entropy => cmd_entropy(cfg),
    }
}

/// Loads, resolves and runs one invocation, writing its files and manifest.
pub fn run(args: &Args) -> Result<Manifest> {
    let start = Instant::now();
    let workers = workers_from_env()?;
    let bytes = std::fs::read(&args.config)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| config_err("config is not UTF-8"))?;
    let cfg = RunConfig::from_toml(&text)?.resolve(args.command, args.seed, args.out.clone())?;
    let report = execute(args.command, &cfg)?;
    let out = cfg.out.clone().unwrap();
    write_outputs(&out, &report)?;
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: format!("growthlab {}", env!("CARGO_PKG_VERSION")),
        subcommand: args.command,
        seed: cfg.seed.unwrap(),
        workers,
        wall_time_s: start.elapsed().as_secs_f64(),
        passed: report.passed,
        summary: report.summary.clone(),
        outputs: report.files.iter().map(|f| f.0.clone()).collect(),
        inputs: vec![InputRecord { path: args.config.display().to_string(), git_blob_sha1: git_blob_sha1(&bytes) }],
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(out.join("manifest.toml"), text)?;
    Ok(manifest)
}

fn write_outputs(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, body) in &report.files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Entry point of the binary: parses arguments, runs, maps the outcome to
/// the exit-code contract.
pub fn main_entry() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(m) => {
            for line in &m.summary {
                println!("{line}");
            }
            println!("wrote {} files and manifest.toml to {}", m.outputs.len(), m.config.out.as_ref().unwrap().display());
            if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("growthlab: {e}");
            ExitCode::from(1)
        }
    }
}
