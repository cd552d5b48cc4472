//! Speed functions and reproducible random environments.
//!
//! Every random value is a pure function of `(base_seed, stream_id, site)`:
//! a ChaCha8 generator is keyed by the seed, its stream selects the replica,
//! and the site index selects a disjoint window of the keystream. Grids of any
//! extent therefore agree on the sites they share, and coupled processes can
//! re-read the same site variables independently.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Piecewise-constant, lower-semicontinuous jump-rate profile c(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedFunction {
    breakpoints: Vec<f64>,
    rates: Vec<f64>,
}

impl SpeedFunction {
    /// `rates[k]` applies between `breakpoints[k-1]` and `breakpoints[k]`.
    pub fn new(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != breakpoints.len() + 1 {
            return Err(param(format!(
                "{} breakpoints need {} rates, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                rates.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(param("breakpoints must be finite and strictly increasing"));
        }
        if rates.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(param("all piece rates must be finite and positive"));
        }
        Ok(SpeedFunction { breakpoints, rates })
    }

    pub fn constant(c: f64) -> Result<Self> {
        SpeedFunction::new(vec![], vec![c])
    }

    /// Rate `c1` on x < 0 and `c2` on x > 0, with the minimum at x = 0.
    pub fn two_phase(c1: f64, c2: f64) -> Result<Self> {
        SpeedFunction::new(vec![0.0], vec![c1, c2])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Index of the piece containing `x` (for `x` off the breakpoints).
    pub fn piece(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|b| *b < x)
    }

    pub fn at(&self, x: f64) -> f64 {
        let k = self.piece(x);
        if k < self.breakpoints.len() && self.breakpoints[k] == x {
            self.rates[k].min(self.rates[k + 1])
        } else {
            self.rates[k]
        }
    }

    /// The same profile translated so that `c'(x) = c(x - dx)`.
    pub fn shifted(&self, dx: f64) -> SpeedFunction {
        SpeedFunction { breakpoints: self.breakpoints.iter().map(|b| b + dx).collect(), rates: self.rates.clone() }
    }

    /// The mirror image `c'(x) = c(-x)`.
    pub fn reflected(&self) -> SpeedFunction {
        SpeedFunction {
            breakpoints: self.breakpoints.iter().rev().map(|b| -b).collect(),
            rates: self.rates.iter().rev().cloned().collect(),
        }
    }
}

/// c(x), with the minimum of the adjacent rates at a breakpoint.
pub fn speed_at(c: &SpeedFunction, x: f64) -> f64 {
    c.at(x)
}

/// Identifies one random stream: a seed and a stream (replica) number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub base_seed: u64,
    pub stream_id: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Words of keystream reserved for each 2-d site.
const SITE_WORDS_LOG2: u32 = 12;
/// Position of the sequential stream, above every site window.
const SEQUENTIAL_WORD_POS: u128 = 1 << 66;

fn zigzag(i: i64) -> u64 {
    ((i << 1) ^ (i >> 63)) as u64
}

/// Key of lattice site (i, j); supports |i| < 2^25 and 0 ≤ j < 2^26.
pub fn site_key(i: i64, j: i64) -> u64 {
    debug_assert!(i.abs() < (1 << 25) && (0..(1 << 26)).contains(&j), "site ({i},{j}) out of key range");
    (zigzag(i) << 26) | (j as u64)
}

impl RngSpec {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        RngSpec { base_seed, stream_id }
    }

    /// A statistically independent stream derived from this one and a tag.
    pub fn substream(&self, tag: u64) -> RngSpec {
        RngSpec { base_seed: self.base_seed, stream_id: splitmix(self.stream_id ^ splitmix(tag)) }
    }

    fn base(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Sequential generator for draws not attached to a site.
    pub fn stream_rng(&self) -> ChaCha8Rng {
        let mut rng = self.base();
        rng.set_word_pos(SEQUENTIAL_WORD_POS);
        rng
    }

    /// Generator positioned at the window of lattice site (i, j).
    pub fn site_rng(&self, i: i64, j: i64) -> ChaCha8Rng {
        let mut s = SiteSampler::new(*self);
        s.at(i, j).clone()
    }

    /// Generator positioned at the window of 1-d site `i`, large enough for
    /// long event sequences.
    pub fn line_rng(&self, i: i64) -> ChaCha8Rng {
        let mut rng = self.base();
        rng.set_word_pos((zigzag(i) as u128) << 32);
        rng
    }
}

/// Reusable generator that jumps to a site window on demand.
pub struct SiteSampler {
    rng: ChaCha8Rng,
}

impl SiteSampler {
    pub fn new(spec: RngSpec) -> Self {
        SiteSampler { rng: spec.base() }
    }

    pub fn at(&mut self, i: i64, j: i64) -> &mut ChaCha8Rng {
        self.rng.set_word_pos((site_key(i, j) as u128) << SITE_WORDS_LOG2);
        &mut self.rng
    }
}

/// The set of lattice sites a grid covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Sites 0 ≤ i ≤ m, 0 ≤ j ≤ n.
    Rectangle { m: usize, n: usize },
    /// Rows j = 1..=rows, row j covering 1−j ≤ i ≤ right[j−1].
    Wedge { rows: usize, right: Vec<i64> },
}

impl Region {
    /// Wedge rows 1..=rows whose top row ends at `u`; every row reaches one
    /// further right than the row above, so the region is closed under
    /// predecessors.
    pub fn wedge(rows: usize, u: i64) -> Region {
        Region::Wedge { rows, right: (1..=rows as i64).map(|j| u + rows as i64 - j).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Region::Wedge { rows, right } = self {
            if right.len() != *rows || *rows == 0 {
                return Err(Error::Region(format!("wedge with {rows} rows has {} extents", right.len())));
            }
            for (k, &r) in right.iter().enumerate() {
                let j = k as i64 + 1;
                if r < 1 - j {
                    return Err(Error::Region(format!("row {j} is empty")));
                }
                if k > 0 && right[k - 1] < r + 1 {
                    return Err(Error::Region(format!("row {j} extends beyond its predecessors")));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        self.index(i, j).is_some()
    }

    /// Position of (i, j) in the flat value vector.
    pub fn index(&self, i: i64, j: i64) -> Option<usize> {
        match self {
            Region::Rectangle { m, n } => {
                if i >= 0 && j >= 0 && i as usize <= *m && j as usize <= *n {
                    Some(i as usize * (n + 1) + j as usize)
                } else {
                    None
                }
            }
            Region::Wedge { rows, right } => {
                if j < 1 || j as usize > *rows || i < 1 - j || i > right[j as usize - 1] {
                    return None;
                }
                // rows before j hold Σ (right[r] + r) entries (row r+1 starts at −r)
                let before: i64 = right[..j as usize - 1].iter().enumerate().map(|(r, &x)| x + r as i64 + 1).sum();
                Some((before + i - (1 - j)) as usize)
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Region::Rectangle { m, n } => (m + 1) * (n + 1),
            Region::Wedge { right, .. } => right.iter().enumerate().map(|(r, &x)| (x + r as i64 + 1) as usize).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All sites in storage order.
    pub fn sites(&self) -> Box<dyn Iterator<Item = (i64, i64)> + '_> {
        match self {
            Region::Rectangle { m, n } => {
                let n = *n as i64;
                Box::new((0..=*m as i64).flat_map(move |i| (0..=n).map(move |j| (i, j))))
            }
            Region::Wedge { rows, right } => Box::new(
                (1..=*rows as i64).flat_map(move |j| (1 - j..=right[j as usize - 1]).map(move |i| (i, j))),
            ),
        }
    }
}

/// How the values of a grid were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    /// Site (i, j) carries Exp(c((i − shift)/n)).
    Exponential { speed: SpeedFunction, n: u64, shift: i64 },
    /// Log-weights ω = log Y with Y⁻¹ ~ Gamma(μ) in the bulk; with the
    /// boundary flag, U⁻¹ ~ Gamma(θ) on the i-axis and V⁻¹ ~ Gamma(μ−θ) on the
    /// j-axis. The origin always holds 0 (Y = 1).
    LogGamma { mu: f64, theta: f64, with_boundary: bool },
    /// Values supplied by the caller; not regenerable.
    Custom,
}

struct Sampler {
    bulk: Option<Gamma<f64>>,
    u: Option<Gamma<f64>>,
    v: Option<Gamma<f64>>,
}

impl Distribution {
    fn validate(&self) -> Result<()> {
        match self {
            Distribution::Exponential { n, .. } if *n == 0 => Err(param("scale n must be at least 1")),
            Distribution::LogGamma { mu, theta, .. } => {
                if !(*mu > 0.0) || !mu.is_finite() {
                    return Err(param(format!("mu must be positive, got {mu}")));
                }
                if !(*theta > 0.0 && theta < mu) {
                    return Err(param(format!("theta must lie in (0, mu) = (0, {mu}), got {theta}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn sampler(&self) -> Sampler {
        match self {
            Distribution::LogGamma { mu, theta, .. } => Sampler {
                bulk: Gamma::new(*mu, 1.0).ok(),
                u: Gamma::new(*theta, 1.0).ok(),
                v: Gamma::new(mu - theta, 1.0).ok(),
            },
            _ => Sampler { bulk: None, u: None, v: None },
        }
    }

    fn draw(&self, s: &Sampler, rng: &mut ChaCha8Rng, i: i64, j: i64) -> f64 {
        match self {
            Distribution::Exponential { speed, n, shift } => {
                let e: f64 = rng.sample(Exp1);
                e / speed.at((i - shift) as f64 / *n as f64)
            }
            Distribution::LogGamma { with_boundary, .. } => {
                if i == 0 && j == 0 {
                    return 0.0;
                }
                let g = match (with_boundary, i, j) {
                    (true, _, 0) => s.u.as_ref().unwrap(),
                    (true, 0, _) => s.v.as_ref().unwrap(),
                    _ => s.bulk.as_ref().unwrap(),
                };
                -g.sample(rng).ln()
            }
            Distribution::Custom => f64::NAN,
        }
    }

    /// The value this distribution assigns to site (i, j) under `rng`.
    pub fn sample_site(&self, rng: &RngSpec, i: i64, j: i64) -> f64 {
        let s = self.sampler();
        let mut sites = SiteSampler::new(*rng);
        self.draw(&s, sites.at(i, j), i, j)
    }
}

/// Generation record sufficient to rebuild a grid bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub region: Region,
    pub distribution: Distribution,
    pub rng: RngSpec,
    pub count: usize,
}

impl GridMetadata {
    pub fn regenerate(&self) -> Result<WeightGrid> {
        if self.distribution == Distribution::Custom {
            return Err(param("custom grids cannot be regenerated"));
        }
        WeightGrid::generate(self.region.clone(), self.distribution.clone(), self.rng)
    }
}

/// Random environment values on a region.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    region: Region,
    values: Vec<f64>,
    distribution: Distribution,
    rng: RngSpec,
}

impl WeightGrid {
    /// Draws every site of `region` from `distribution`.
    pub fn generate(region: Region, distribution: Distribution, rng: RngSpec) -> Result<Self> {
        region.validate()?;
        distribution.validate()?;
        let s = distribution.sampler();
        let mut sites = SiteSampler::new(rng);
        let values = region.sites().map(|(i, j)| distribution.draw(&s, sites.at(i, j), i, j)).collect();
        Ok(WeightGrid { region, values, distribution, rng })
    }

    /// A grid with caller-supplied values.
    pub fn from_fn(region: Region, f: impl Fn(i64, i64) -> f64) -> Result<Self> {
        region.validate()?;
        let values = region.sites().map(|(i, j)| f(i, j)).collect();
        Ok(WeightGrid { region, values, distribution: Distribution::Custom, rng: RngSpec::new(0, 0) })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    pub fn rng(&self) -> RngSpec {
        self.rng
    }

    pub fn get(&self, i: i64, j: i64) -> Option<f64> {
        self.region.index(i, j).map(|k| self.values[k])
    }

    pub fn metadata(&self) -> GridMetadata {
        GridMetadata {
            region: self.region.clone(),
            distribution: self.distribution.clone(),
            rng: self.rng,
            count: self.values.len(),
        }
    }

    fn paths(stem: &Path) -> (PathBuf, PathBuf) {
        (stem.with_extension("bin"), stem.with_extension("toml"))
    }

    /// Writes `<stem>.bin` (little-endian f64 values behind a short header) and
    /// `<stem>.toml` (the generation record).
    pub fn write_sidecar(&self, stem: &Path) -> Result<()> {
        let (bin, meta) = Self::paths(stem);
        let mut bytes = Vec::with_capacity(16 + 8 * self.values.len());
        bytes.extend_from_slice(b"GLWGRID1");
        bytes.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(bin, bytes)?;
        let text = toml::to_string(&self.metadata()).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(meta, text)?;
        Ok(())
    }

    pub fn read_sidecar(stem: &Path) -> Result<Self> {
        let (bin, meta) = Self::paths(stem);
        let text = std::fs::read_to_string(meta)?;
        let md: GridMetadata = toml::from_str(&text).map_err(|e| Error::Io(e.to_string()))?;
        let bytes = std::fs::read(bin)?;
        if bytes.len() < 16 || &bytes[..8] != b"GLWGRID1" {
            return Err(Error::Io("not a weight-grid sidecar".into()));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if count != md.count || bytes.len() != 16 + 8 * count || count != md.region.len() {
            return Err(Error::Io("sidecar length does not match its metadata".into()));
        }
        let values =
            bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(WeightGrid { region: md.region, values, distribution: md.distribution, rng: md.rng })
    }
}

/// Exponential weights with rate c((i − shift)/n) at site (i, j).
pub fn sample_exponential_grid(c: &SpeedFunction, n: u64, shift: i64, region: Region, rng: RngSpec) -> WeightGrid {
    WeightGrid::generate(region, Distribution::Exponential { speed: c.clone(), n: n.max(1), shift }, rng)
        .expect("exponential grids with a valid region cannot fail")
}

/// Log-gamma polymer log-weights on the rectangle [0, m] × [0, n].
pub fn sample_loggamma_grid(
    mu: f64,
    theta: f64,
    m: usize,
    n: usize,
    with_boundary: bool,
    rng: RngSpec,
) -> Result<WeightGrid> {
    WeightGrid::generate(Region::Rectangle { m, n }, Distribution::LogGamma { mu, theta, with_boundary }, rng)
}
