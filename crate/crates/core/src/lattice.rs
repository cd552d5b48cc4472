//! Last-passage times and log-partition functions by dynamic programming.
//!
//! Rectangles use up-right steps from the origin. Wedge regions use the steps
//! (1,0), (0,1), (−1,1) with passage time zero on the boundary
//! {(i,0): i ≥ 0} ∪ {(i,−i): i < 0}.

use rand::Rng;

use crate::env::{Region, WeightGrid};
use crate::error::{Error, Result};
use crate::specfun::lgamma;

/// Whether the weight of the starting site counts towards path weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Exclude,
    Include,
}

/// ln C(a, b).
pub fn ln_binomial(a: u64, b: u64) -> f64 {
    if b > a {
        return f64::NEG_INFINITY;
    }
    if b == 0 || b == a {
        return 0.0;
    }
    lgamma(a as f64 + 1.0) - lgamma(b as f64 + 1.0) - lgamma((a - b) as f64 + 1.0)
}

fn on_wedge_boundary(i: i64, j: i64) -> bool {
    (j == 0 && i >= 0) || (i < 0 && j == -i)
}

fn in_wedge_lattice(i: i64, j: i64) -> bool {
    j >= 1 && i >= 1 - j
}

/// Last-passage times over a region.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageField {
    region: Region,
    values: Vec<f64>,
    origin: Origin,
}

impl PassageField {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// T(i, j); on a wedge, boundary sites read as 0.
    pub fn get(&self, i: i64, j: i64) -> Option<f64> {
        match self.region.index(i, j) {
            Some(k) => Some(self.values[k]),
            None if matches!(self.region, Region::Wedge { .. }) && on_wedge_boundary(i, j) => Some(0.0),
            None => None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn predecessors(&self, i: i64, j: i64) -> Vec<(i64, i64)> {
        match self.region {
            Region::Rectangle { .. } => {
                let mut p = vec![];
                if i > 0 {
                    p.push((i - 1, j));
                }
                if j > 0 {
                    p.push((i, j - 1));
                }
                p
            }
            Region::Wedge { .. } => vec![(i - 1, j), (i + 1, j - 1), (i, j - 1)],
        }
    }
}

/// Last-passage times with the starting weight ignored: T(0,0) = 0.
pub fn last_passage(grid: &WeightGrid) -> Result<PassageField> {
    last_passage_with(grid, Origin::Exclude)
}

/// Last-passage times under an explicit origin convention (ignored on wedges).
pub fn last_passage_with(grid: &WeightGrid, origin: Origin) -> Result<PassageField> {
    let region = grid.region().clone();
    let w = grid.values();
    let mut t = vec![0.0; w.len()];
    match &region {
        Region::Rectangle { m, n } => {
            let (m, n) = (*m, *n);
            let stride = n + 1;
            for i in 0..=m {
                for j in 0..=n {
                    let k = i * stride + j;
                    if i == 0 && j == 0 {
                        t[k] = if origin == Origin::Include { w[k] } else { 0.0 };
                        continue;
                    }
                    let left = if i > 0 { t[k - stride] } else { f64::NEG_INFINITY };
                    let down = if j > 0 { t[k - 1] } else { f64::NEG_INFINITY };
                    t[k] = left.max(down) + w[k];
                }
            }
        }
        Region::Wedge { .. } => {
            let read = |t: &[f64], i: i64, j: i64| -> Result<f64> {
                if on_wedge_boundary(i, j) {
                    return Ok(0.0);
                }
                if !in_wedge_lattice(i, j) {
                    return Ok(f64::NEG_INFINITY);
                }
                region
                    .index(i, j)
                    .map(|k| t[k])
                    .ok_or_else(|| Error::Region(format!("predecessor ({i},{j}) missing from wedge region")))
            };
            for (k, (i, j)) in region.sites().enumerate() {
                let best = read(&t, i - 1, j)?.max(read(&t, i, j - 1)?).max(read(&t, i + 1, j - 1)?);
                t[k] = best + w[k];
            }
        }
    }
    Ok(PassageField { region, values: t, origin })
}

/// Passage time at a single rectangle corner with O(n) memory.
pub fn corner_passage_time(grid: &WeightGrid, origin: Origin) -> Result<f64> {
    let Region::Rectangle { m, n } = *grid.region() else {
        return Err(Error::Region("streaming passage time needs a rectangle".into()));
    };
    let w = grid.values();
    let stride = n + 1;
    let mut col = vec![f64::NEG_INFINITY; stride];
    for i in 0..=m {
        for j in 0..=n {
            let k = i * stride + j;
            if i == 0 && j == 0 {
                col[0] = if origin == Origin::Include { w[0] } else { 0.0 };
                continue;
            }
            let down = if j > 0 { col[j - 1] } else { f64::NEG_INFINITY };
            col[j] = col[j].max(down) + w[k];
        }
    }
    Ok(col[n])
}

/// Ordered site list of a lattice path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePath {
    sites: Vec<(i64, i64)>,
    steps: StepSet,
}

/// Admissible steps of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSet {
    UpRight,
    Wedge,
}

impl LatticePath {
    pub fn new(sites: Vec<(i64, i64)>, steps: StepSet) -> Result<Self> {
        for w in sites.windows(2) {
            let d = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let ok = match steps {
                StepSet::UpRight => d == (1, 0) || d == (0, 1),
                StepSet::Wedge => d == (1, 0) || d == (0, 1) || d == (-1, 1),
            };
            if !ok {
                return Err(Error::Parameter(format!("step {d:?} not allowed in a {steps:?} path")));
            }
        }
        Ok(LatticePath { sites, steps })
    }

    pub fn sites(&self) -> &[(i64, i64)] {
        &self.sites
    }

    pub fn steps(&self) -> StepSet {
        self.steps
    }
}

/// A maximal path and whether any tie was broken while tracing it.
#[derive(Debug, Clone)]
pub struct MaxPath {
    pub path: LatticePath,
    pub had_tie: bool,
}

/// Traces a maximal path back from `endpoint`. Ties go to the horizontal
/// predecessor (i−1, j).
pub fn max_path_backtrace(field: &PassageField, grid: &WeightGrid, endpoint: (i64, i64)) -> Result<MaxPath> {
    if grid.region() != field.region() {
        return Err(Error::Region("field and grid cover different regions".into()));
    }
    let (mut i, mut j) = endpoint;
    if field.region().index(i, j).is_none() {
        return Err(Error::Range(format!("endpoint ({i},{j}) outside the region")));
    }
    let wedge = matches!(field.region(), Region::Wedge { .. });
    let mut rev = vec![(i, j)];
    let mut had_tie = false;
    loop {
        if (!wedge && (i, j) == (0, 0)) || (wedge && on_wedge_boundary(i, j)) {
            break;
        }
        let mut best: Option<((i64, i64), f64)> = None;
        for p in field.predecessors(i, j) {
            let v = match field.get(p.0, p.1) {
                Some(v) => v,
                None => continue,
            };
            if wedge && !in_wedge_lattice(p.0, p.1) && !on_wedge_boundary(p.0, p.1) {
                continue;
            }
            match best {
                Some((_, b)) if v < b => {}
                Some((_, b)) if v == b => had_tie = true,
                _ => best = Some((p, v)),
            }
        }
        let (p, _) = best.ok_or_else(|| Error::Region(format!("no predecessor for ({i},{j})")))?;
        (i, j) = p;
        rev.push(p);
    }
    rev.reverse();
    let steps = if wedge { StepSet::Wedge } else { StepSet::UpRight };
    Ok(MaxPath { path: LatticePath::new(rev, steps)?, had_tie })
}

/// log Z^β over a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPartitionField {
    m: usize,
    n: usize,
    beta: f64,
    values: Vec<f64>,
    origin: Origin,
}

fn lse2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn lse(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl LogPartitionField {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn get(&self, i: i64, j: i64) -> Option<f64> {
        if i < 0 || j < 0 || i as usize > self.m || j as usize > self.n {
            return None;
        }
        Some(self.values[i as usize * (self.n + 1) + j as usize])
    }

    /// Free-endpoint log partition function: logsumexp over i + j = level.
    pub fn total(&self, level: usize) -> Result<f64> {
        let ends = self.level_sites(level)?;
        Ok(lse(ends.iter().map(|&(i, j)| self.get(i, j).unwrap())))
    }

    fn level_sites(&self, level: usize) -> Result<Vec<(i64, i64)>> {
        if level > self.m || level > self.n {
            return Err(Error::Range(format!(
                "level {level} is not fully covered by a {}x{} rectangle",
                self.m, self.n
            )));
        }
        Ok((0..=level as i64).map(|i| (i, level as i64 - i)).collect())
    }
}

/// log Z^β(i, j) = βω(i, j) + logsumexp over predecessors.
pub fn log_partition(grid: &WeightGrid, beta: f64, origin: Origin) -> Result<LogPartitionField> {
    let Region::Rectangle { m, n } = *grid.region() else {
        return Err(Error::Region("partition functions are computed on rectangles".into()));
    };
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Parameter(format!("beta must be finite and nonnegative, got {beta}")));
    }
    let w = grid.values();
    let stride = n + 1;
    let mut z = vec![0.0; w.len()];
    for i in 0..=m {
        for j in 0..=n {
            let k = i * stride + j;
            if i == 0 && j == 0 {
                z[k] = if origin == Origin::Include { beta * w[k] } else { 0.0 };
                continue;
            }
            let left = if i > 0 { z[k - stride] } else { f64::NEG_INFINITY };
            let down = if j > 0 { z[k - 1] } else { f64::NEG_INFINITY };
            z[k] = beta * w[k] + lse2(left, down);
        }
    }
    Ok(LogPartitionField { m, n, beta, values: z, origin })
}

/// log Z^β at the far corner of a rectangle with O(n) memory.
pub fn corner_log_partition(grid: &WeightGrid, beta: f64, origin: Origin) -> Result<f64> {
    let Region::Rectangle { m, n } = *grid.region() else {
        return Err(Error::Region("partition functions are computed on rectangles".into()));
    };
    let w = grid.values();
    let stride = n + 1;
    let mut col = vec![f64::NEG_INFINITY; stride];
    for i in 0..=m {
        for j in 0..=n {
            let k = i * stride + j;
            if i == 0 && j == 0 {
                col[0] = if origin == Origin::Include { beta * w[0] } else { 0.0 };
                continue;
            }
            let down = if j > 0 { col[j - 1] } else { f64::NEG_INFINITY };
            col[j] = beta * w[k] + lse2(col[j], down);
        }
    }
    Ok(col[n])
}

/// Quenched law of the endpoint among sites with i + j = level.
pub fn quenched_endpoint_distribution(field: &LogPartitionField, level: usize) -> Result<Vec<((i64, i64), f64)>> {
    let ends = field.level_sites(level)?;
    let total = field.total(level)?;
    Ok(ends.into_iter().map(|(i, j)| ((i, j), (field.get(i, j).unwrap() - total).exp())).collect())
}

/// Fixed or free endpoint for path sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Fixed(i64, i64),
    Free(usize),
}

/// Draws a path from the quenched polymer measure by backward sampling: each
/// predecessor is chosen with probability proportional to its Z.
pub fn sample_quenched_path<R: Rng + ?Sized>(
    field: &LogPartitionField,
    grid: &WeightGrid,
    endpoint: Endpoint,
    rng: &mut R,
) -> Result<LatticePath> {
    if *grid.region() != (Region::Rectangle { m: field.m, n: field.n }) {
        return Err(Error::Region("field and grid cover different regions".into()));
    }
    let (mut i, mut j) = match endpoint {
        Endpoint::Fixed(i, j) => {
            if field.get(i, j).is_none() {
                return Err(Error::Range(format!("endpoint ({i},{j}) outside the rectangle")));
            }
            (i, j)
        }
        Endpoint::Free(level) => {
            let dist = quenched_endpoint_distribution(field, level)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = dist.last().unwrap().0;
            for (s, p) in &dist {
                acc += p;
                if u < acc {
                    pick = *s;
                    break;
                }
            }
            pick
        }
    };
    let mut rev = vec![(i, j)];
    while (i, j) != (0, 0) {
        let next = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let a = field.get(i - 1, j).unwrap();
            let b = field.get(i, j - 1).unwrap();
            // P(horizontal) = Z_a / (Z_a + Z_b)
            let p_left = 1.0 / (1.0 + (b - a).exp());
            if rng.random::<f64>() < p_left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        (i, j) = next;
        rev.push(next);
    }
    rev.reverse();
    LatticePath::new(rev, StepSet::UpRight)
}

/// One row of the zero-temperature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub beta: f64,
    /// log Z/β − T at the endpoint
    pub gap: f64,
    /// log(#paths)/β, the upper end of the sandwich
    pub bound: f64,
    /// quenched probability of the maximal path
    pub q_max: f64,
}

/// For each β: the free-energy gap to the passage time and the quenched mass
/// of the maximal path.
pub fn zero_temperature_gap(
    grid: &WeightGrid,
    endpoint: (i64, i64),
    betas: &[f64],
    origin: Origin,
) -> Result<Vec<GapRow>> {
    let t = last_passage_with(grid, origin)?;
    let tv = t
        .get(endpoint.0, endpoint.1)
        .ok_or_else(|| Error::Range(format!("endpoint {endpoint:?} outside the region")))?;
    let npaths = ln_binomial((endpoint.0 + endpoint.1) as u64, endpoint.0 as u64);
    betas
        .iter()
        .map(|&beta| {
            if !(beta > 0.0) {
                return Err(Error::Parameter(format!("zero-temperature table needs beta > 0, got {beta}")));
            }
            let z = log_partition(grid, beta, origin)?;
            let lz = z.get(endpoint.0, endpoint.1).unwrap();
            Ok(GapRow { beta, gap: lz / beta - tv, bound: npaths / beta, q_max: (beta * tv - lz).exp() })
        })
        .collect()
}

/// Whether a macroscopic path rate is taken with free or constrained endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    /// p(½, ½) − Σ p(Δγ); the path must end on the level x + y = 1
    Free,
    /// p(γ(1)) − Σ p(Δγ)
    Constrained,
}

/// Rate of a piecewise-linear macroscopic path for a 1-homogeneous free
/// energy `p`; the integral of p(γ′) is exact as a sum over segments.
pub fn path_rate_functional(vertices: &[(f64, f64)], p: &dyn Fn(f64, f64) -> f64, mode: RateMode) -> Result<f64> {
    if vertices.len() < 2 {
        return Err(Error::Parameter("a path needs at least two vertices".into()));
    }
    let mut sum = 0.0;
    for w in vertices.windows(2) {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        if dx < 0.0 || dy < 0.0 {
            return Err(Error::NonMonotone(format!("segment {:?} -> {:?} decreases", w[0], w[1])));
        }
        if dx > 0.0 || dy > 0.0 {
            sum += p(dx, dy);
        }
    }
    let start = vertices[0];
    let end = vertices[vertices.len() - 1];
    let (ux, uy) = (end.0 - start.0, end.1 - start.1);
    match mode {
        RateMode::Free => {
            if ((ux + uy) - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("free-endpoint path must have length 1, got {}", ux + uy)));
            }
            Ok(p(0.5, 0.5) - sum)
        }
        RateMode::Constrained => Ok(p(ux, uy) - sum),
    }
}
