//! Event-driven simulation of inhomogeneous TASEP through its height process,
//! the wedge-started ξ processes, and the couplings between them.
//!
//! Heights satisfy 0 ≤ z_{i+1} − z_i ≤ 1, occupations are η_i = z_i − z_{i−1},
//! and z_i drops by one when site i rings while η_i = 1 and η_{i+1} = 0. The
//! ξ^k process starts at ξ_i = max(0, −i) and ξ_i rises by one when site i + k
//! rings, unless that would break ξ_i ≤ ξ_{i−1} or ξ_i ≤ ξ_{i+1} + 1.
//!
//! Both run on a finite window with frozen neighbours outside. A site whose
//! state could have been influenced by the frozen edge is tracked from each
//! side; if that region reaches a recorded site the run fails with
//! [`Error::WindowOverflow`] rather than return a truncated answer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::env::{Region, RngSpec, SpeedFunction, WeightGrid};
use crate::error::{param, Error, Result};
use crate::lattice::{corner_passage_time, Origin};
use crate::mc::{collect_replicas, two_sample_ks, Estimate, KSResult};

/// Per-site Poisson clocks; site i rings at rate c(i/n).
///
/// Every consumer gets its own copy of a site's event sequence, so coupled
/// processes read identical ring times without sharing mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockStream {
    spec: RngSpec,
    speed: SpeedFunction,
    n: u64,
    offset: i64,
}

impl ClockStream {
    pub fn new(spec: RngSpec, speed: SpeedFunction, n: u64) -> Self {
        ClockStream { spec, speed, n: n.max(1), offset: 0 }
    }

    /// A stream whose site i replays the clock of site i + d.
    pub fn with_offset(&self, d: i64) -> Self {
        ClockStream { offset: self.offset + d, ..self.clone() }
    }

    pub fn speed(&self) -> &SpeedFunction {
        &self.speed
    }

    pub fn scale(&self) -> u64 {
        self.n
    }

    pub fn rate(&self, site: i64) -> f64 {
        self.speed.at((site + self.offset) as f64 / self.n as f64)
    }

    /// Ring times of `site`, increasing.
    pub fn site_clock(&self, site: i64) -> SiteClock {
        let s = site + self.offset;
        SiteClock { rng: self.spec.line_rng(s), rate: self.rate(site), t: 0.0 }
    }
}

/// Iterator over the ring times of one site.
#[derive(Debug, Clone)]
pub struct SiteClock {
    rng: ChaCha8Rng,
    rate: f64,
    t: f64,
}

impl Iterator for SiteClock {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if !(self.rate > 0.0) {
            return None;
        }
        let e: f64 = self.rng.sample(Exp1);
        self.t += e / self.rate;
        Some(self.t)
    }
}

#[derive(Debug, Clone, Copy)]
struct Ring {
    time: f64,
    site: i64,
}

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ring {}

impl PartialOrd for Ring {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ring {
    // reversed so the max-heap pops the earliest ring; equal times go to the lower site
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.site.cmp(&self.site))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Exclusion,
    Xi,
}

struct Engine<'a> {
    lo: i64,
    state: Vec<i64>,
    clock_shift: i64,
    clocks: &'a ClockStream,
    rule: Rule,
}

struct EngineStats {
    rings: u64,
}

impl Engine<'_> {
    fn hi(&self) -> i64 {
        self.lo + self.state.len() as i64 - 3
    }

    fn fires(&self, k: usize) -> bool {
        let (l, c, r) = (self.state[k - 1], self.state[k], self.state[k + 1]);
        match self.rule {
            Rule::Exclusion => c - l == 1 && r == c,
            Rule::Xi => c < l && c <= r,
        }
    }

    /// Runs rings up to `until`, calling `on_jump(site, time)` after each
    /// state change; it returns true to stop early. Sites in `guard` must stay
    /// out of the edge-influenced region.
    fn run(
        &mut self,
        until: f64,
        guard: (i64, i64),
        mut on_jump: impl FnMut(i64, f64, i64) -> bool,
    ) -> Result<EngineStats> {
        let (lo, hi) = (self.lo, self.hi());
        let mut clocks: Vec<SiteClock> = (lo..=hi).map(|s| self.clocks.site_clock(s + self.clock_shift)).collect();
        let mut heap = BinaryHeap::with_capacity(clocks.len());
        for (k, c) in clocks.iter_mut().enumerate() {
            if let Some(t) = c.next() {
                heap.push(Ring { time: t, site: lo + k as i64 });
            }
        }
        let mut left = lo - 1;
        let mut right = hi + 1;
        let mut rings = 0;
        let delta = match self.rule {
            Rule::Exclusion => -1,
            Rule::Xi => 1,
        };
        while let Some(ring) = heap.pop() {
            if ring.time > until {
                break;
            }
            rings += 1;
            let s = ring.site;
            if s == left + 1 {
                left = s;
            }
            if s == right - 1 {
                right = s;
            }
            if left >= guard.0 || right <= guard.1 {
                return Err(Error::WindowOverflow(format!(
                    "edge influence reached site {} at time {:.4}; recorded sites are [{}, {}] within [{lo}, {hi}]",
                    if left >= guard.0 { left } else { right },
                    ring.time,
                    guard.0,
                    guard.1
                )));
            }
            let k = (s - lo + 1) as usize;
            if self.fires(k) {
                self.state[k] += delta;
                debug_assert!(self.local_constraints_hold(k));
                if on_jump(s, ring.time, self.state[k]) {
                    break;
                }
            }
            if let Some(t) = clocks[(s - lo) as usize].next() {
                heap.push(Ring { time: t, site: s });
            }
        }
        Ok(EngineStats { rings })
    }

    fn local_constraints_hold(&self, k: usize) -> bool {
        let (l, c, r) = (self.state[k - 1], self.state[k], self.state[k + 1]);
        match self.rule {
            Rule::Exclusion => (0..=1).contains(&(c - l)) && (0..=1).contains(&(r - c)),
            Rule::Xi => c <= l && c <= r + 1,
        }
    }
}

/// Sites [lo, hi] whose evolution is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(param(format!("empty window [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }
}

/// Piecewise-constant macroscopic density ρ0(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    breakpoints: Vec<f64>,
    densities: Vec<f64>,
}

impl DensityProfile {
    pub fn new(breakpoints: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if densities.len() != breakpoints.len() + 1 {
            return Err(param("a density profile needs one more value than breakpoints"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(param("density breakpoints must increase strictly"));
        }
        if densities.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(param("densities must lie in [0, 1]"));
        }
        Ok(DensityProfile { breakpoints, densities })
    }

    /// ρ_left on x < 0 and ρ_right on x ≥ 0.
    pub fn riemann(left: f64, right: f64) -> Result<Self> {
        DensityProfile::new(vec![0.0], vec![left, right])
    }

    pub fn at(&self, x: f64) -> f64 {
        self.densities[self.breakpoints.partition_point(|&b| b <= x)]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// v0(x) = ∫_0^x ρ0, negative for x < 0.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let (a, b, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
        let mut total = 0.0;
        let mut lo = a;
        for (k, &bp) in self.breakpoints.iter().enumerate() {
            if bp <= lo {
                continue;
            }
            if bp >= b {
                break;
            }
            total += self.densities[k] * (bp - lo);
            lo = bp;
        }
        total += self.at(lo) * (b - lo);
        sign * total
    }
}

/// Initial particle configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialData {
    /// every negative site occupied
    Step,
    /// independent Bernoulli(ρ) occupations
    Bernoulli(f64),
    /// independent Bernoulli(ρ0(i/n)) occupations
    Profile(DensityProfile),
    /// exactly these sites occupied
    Sites(Vec<i64>),
}

impl InitialData {
    fn validate(&self) -> Result<()> {
        match self {
            InitialData::Bernoulli(r) if !(0.0..=1.0).contains(r) => {
                Err(param(format!("Bernoulli density must lie in [0, 1], got {r}")))
            }
            _ => Ok(()),
        }
    }

    fn occupation(&self, i: i64, n: u64, spec: &RngSpec) -> bool {
        let coin = |rho: f64| rho >= 1.0 || (rho > 0.0 && spec.site_rng(i, 0).random::<f64>() < rho);
        match self {
            InitialData::Step => i < 0,
            InitialData::Bernoulli(rho) => coin(*rho),
            InitialData::Profile(p) => coin(p.at(i as f64 / n as f64)),
            InitialData::Sites(s) => s.contains(&i),
        }
    }

    /// Heights on [lo, hi] normalised so that z_0 = 0.
    fn heights(&self, lo: i64, hi: i64, n: u64, spec: &RngSpec) -> Vec<i64> {
        let a = lo.min(0);
        let b = hi.max(0);
        let mut z = vec![0i64; (b - a + 1) as usize];
        let origin = (-a) as usize;
        for i in 1..=b {
            let k = (i - a) as usize;
            z[k] = z[k - 1] + self.occupation(i, n, spec) as i64;
        }
        for i in (a..0).rev() {
            let k = (i - a) as usize;
            z[k] = z[k + 1] - self.occupation(i + 1, n, spec) as i64;
        }
        debug_assert_eq!(z[origin], 0);
        z[(lo - a) as usize..=(hi - a) as usize].to_vec()
    }
}

/// One snapshot row: (t, i, η, z, J).
pub type SnapshotRow = (f64, i64, u8, i64, i64);

/// A TASEP run: speed c, scale n, initial data, microscopic horizon and the
/// reported window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TasepRun {
    pub speed: SpeedFunction,
    pub n: u64,
    pub initial: InitialData,
    pub horizon: f64,
    pub window: Window,
}

/// Buffer added on each side of a window: 4·max_rate·horizon + 64 sites.
pub fn default_buffer(max_rate: f64, horizon: f64) -> i64 {
    (4.0 * max_rate * horizon).ceil() as i64 + 64
}

/// Heights over the reported window together with every jump time.
#[derive(Debug, Clone, PartialEq)]
pub struct TasepTrajectory {
    n: u64,
    horizon: f64,
    window: Window,
    sim_lo: i64,
    initial: Vec<i64>,
    /// decrement times of z_i for i in [window.lo − 1, window.hi]
    jumps: Vec<Vec<f64>>,
    rings: u64,
}

impl TasepTrajectory {
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn scale(&self) -> u64 {
        self.n
    }

    /// Clock rings processed by the engine, including suppressed ones.
    pub fn ring_count(&self) -> u64 {
        self.rings
    }

    /// Particle jumps out of recorded sites.
    pub fn jump_count(&self) -> usize {
        self.jumps.iter().map(|j| j.len()).sum()
    }

    /// z_i(0) anywhere on the simulated window.
    pub fn z_initial(&self, i: i64) -> Option<i64> {
        let k = i - self.sim_lo;
        (k >= 0).then(|| self.initial.get(k as usize).copied()).flatten()
    }

    fn jumps_at(&self, i: i64) -> Option<&Vec<f64>> {
        if i < self.window.lo - 1 || i > self.window.hi {
            return None;
        }
        self.jumps.get((i - self.window.lo + 1) as usize)
    }

    pub fn z(&self, i: i64, t: f64) -> Option<i64> {
        if !(0.0..=self.horizon).contains(&t) {
            return None;
        }
        let j = self.jumps_at(i)?;
        Some(self.z_initial(i)? - j.partition_point(|&s| s <= t) as i64)
    }

    pub fn eta(&self, i: i64, t: f64) -> Option<u8> {
        Some((self.z(i, t)? - self.z(i - 1, t)?) as u8)
    }

    /// J_i(t) = z_i(0) − z_i(t), the number of jumps across the bond (i, i+1).
    pub fn current(&self, i: i64, t: f64) -> Option<i64> {
        Some(self.z_initial(i)? - self.z(i, t)?)
    }

    /// Snapshot rows (t, i, η, z, J) over the window.
    pub fn snapshot(&self, t: f64) -> Result<Vec<SnapshotRow>> {
        (self.window.lo..=self.window.hi)
            .map(|i| {
                let z = self.z(i, t).ok_or_else(|| Error::Range(format!("time {t} outside [0, {}]", self.horizon)))?;
                Ok((t, i, self.eta(i, t).unwrap(), z, self.current(i, t).unwrap()))
            })
            .collect()
    }
}

/// Simulates `run` with clocks and initial data drawn from `rng`.
pub fn simulate(run: &TasepRun, rng: RngSpec) -> Result<TasepTrajectory> {
    let clocks = ClockStream::new(rng.substream(1), run.speed.clone(), run.n);
    simulate_with_clocks(run, &clocks, rng.substream(0))
}

/// Simulates on externally supplied clocks; `init` seeds random initial data.
pub fn simulate_with_clocks(run: &TasepRun, clocks: &ClockStream, init: RngSpec) -> Result<TasepTrajectory> {
    let buffer = default_buffer(run.speed.max_rate(), run.horizon);
    simulate_with_buffer(run, clocks, init, buffer)
}

/// As [`simulate_with_clocks`] with an explicit buffer width.
pub fn simulate_with_buffer(
    run: &TasepRun,
    clocks: &ClockStream,
    init: RngSpec,
    buffer: i64,
) -> Result<TasepTrajectory> {
    run.initial.validate()?;
    if !(run.horizon >= 0.0) || !run.horizon.is_finite() {
        return Err(param(format!("horizon must be finite and nonnegative, got {}", run.horizon)));
    }
    let w = run.window;
    let (sim_lo, sim_hi) = (w.lo - 1 - buffer.max(1), w.hi + buffer.max(1));
    let initial = run.initial.heights(sim_lo - 1, sim_hi + 1, run.n, &init);
    let mut engine = Engine { lo: sim_lo, state: initial.clone(), clock_shift: 0, clocks, rule: Rule::Exclusion };
    let rec_lo = w.lo - 1;
    let mut jumps = vec![Vec::new(); (w.hi - rec_lo + 1) as usize];
    let stats = engine.run(run.horizon, (rec_lo, w.hi), |s, t, _| {
        if s >= rec_lo && s <= w.hi {
            jumps[(s - rec_lo) as usize].push(t);
        }
        false
    })?;
    Ok(TasepTrajectory {
        n: run.n,
        horizon: run.horizon,
        window: w,
        sim_lo: sim_lo - 1,
        initial,
        jumps,
        rings: stats.rings,
    })
}

/// n⁻¹ Σ_{i ∈ (na, nb]} η_i(nt).
pub fn occupation_measure(traj: &TasepTrajectory, a: f64, b: f64, t: f64, n: u64) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::Range(format!("empty interval ({a}, {b}]")));
    }
    let nf = n as f64;
    let (lo, hi) = ((nf * a).floor() as i64 + 1, (nf * b).floor() as i64);
    let time = nf * t;
    let w = traj.window();
    if lo < w.lo || hi > w.hi {
        return Err(Error::Range(format!("sites ({lo}..={hi}) leave the window [{}, {}]", w.lo, w.hi)));
    }
    if !(0.0..=traj.horizon()).contains(&time) {
        return Err(Error::Range(format!("time {time} outside [0, {}]", traj.horizon())));
    }
    if hi < lo {
        return Ok(0.0);
    }
    // telescoping: Σ η = z_hi − z_{lo−1}
    Ok((traj.z(hi, time).unwrap() - traj.z(lo - 1, time).unwrap()) as f64 / nf)
}

/// A ξ^k path recorded on an index range.
#[derive(Debug, Clone, PartialEq)]
pub struct XiTrajectory {
    k: i64,
    horizon: f64,
    record: (i64, i64),
    /// raise times of ξ_i for i in the recorded range
    raises: Vec<Vec<f64>>,
    rings: u64,
}

impl XiTrajectory {
    pub fn shift(&self) -> i64 {
        self.k
    }

    pub fn recorded(&self) -> (i64, i64) {
        self.record
    }

    pub fn ring_count(&self) -> u64 {
        self.rings
    }

    fn raises_at(&self, i: i64) -> Option<&Vec<f64>> {
        if i < self.record.0 || i > self.record.1 {
            return None;
        }
        self.raises.get((i - self.record.0) as usize)
    }

    /// ξ_i(t); None outside the recorded range or beyond the horizon.
    pub fn xi(&self, i: i64, t: f64) -> Option<i64> {
        if !(0.0..=self.horizon).contains(&t) {
            return None;
        }
        let r = self.raises_at(i)?;
        Some(0.max(-i) + r.partition_point(|&s| s <= t) as i64)
    }

    /// L(i, j) = inf{t : ξ_i(t) ≥ j}; zero on the wedge boundary, None if
    /// the level was not reached within the run.
    pub fn passage(&self, i: i64, j: i64) -> Option<f64> {
        let start = 0.max(-i);
        if j <= start {
            return Some(0.0);
        }
        self.raises_at(i)?.get((j - start - 1) as usize).copied()
    }
}

/// Runs ξ^k up to `horizon` (or until ξ_i reaches level j for `stop = (i, j)`),
/// recording indices `record.0..=record.1`. Index i reads the clock of site i + k.
pub fn simulate_xi(
    k: i64,
    clocks: &ClockStream,
    horizon: f64,
    record: (i64, i64),
    stop: Option<(i64, i64)>,
) -> Result<XiTrajectory> {
    if record.0 > record.1 {
        return Err(param("empty record range"));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(param(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    if let Some((i, _)) = stop {
        if i < record.0 || i > record.1 {
            return Err(param("stopping site must be recorded"));
        }
    }
    let buffer = default_buffer(clocks.speed().max_rate(), horizon);
    let (lo, hi) = (record.0 - buffer, record.1 + buffer);
    let state: Vec<i64> = (lo - 1..=hi + 1).map(|i| 0.max(-i)).collect();
    let mut engine = Engine { lo, state, clock_shift: k, clocks, rule: Rule::Xi };
    let mut raises = vec![Vec::new(); (record.1 - record.0 + 1) as usize];
    let stats = engine.run(horizon, record, |s, t, v| {
        if s >= record.0 && s <= record.1 {
            raises[(s - record.0) as usize].push(t);
        }
        matches!(stop, Some((i, j)) if i == s && v >= j)
    })?;
    Ok(XiTrajectory { k, horizon, record, raises, rings: stats.rings })
}

/// One failed comparison in the envelope check.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeViolation {
    pub site: i64,
    pub time: f64,
    pub z: i64,
    pub sup: i64,
    pub argmax: i64,
}

/// Outcome of comparing z_i(t) with sup_k {z_k(0) − ξ^k_{i−k}(t)}.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    /// (site, time) pairs compared
    pub checked: usize,
    pub violations: Vec<EnvelopeViolation>,
    /// pairs where the k-range could not be shown to contain the maximiser
    pub uncertified: usize,
    /// particle jumps of the z process in the reported window
    pub events: usize,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.uncertified == 0
    }
}

/// Compares the height process with the envelope of the ξ family at every
/// window site and sample time. `xis` must hold one trajectory per k over a
/// contiguous range, each recording indices [window.lo − k, window.hi − k].
pub fn envelope_check(z: &TasepTrajectory, xis: &[XiTrajectory], times: &[f64]) -> Result<EnvelopeReport> {
    let w = z.window();
    if xis.is_empty() {
        return Err(param("envelope check needs at least one xi process"));
    }
    let k_lo = xis.iter().map(|x| x.shift()).min().unwrap();
    let k_hi = xis.iter().map(|x| x.shift()).max().unwrap();
    if xis.len() as i64 != k_hi - k_lo + 1 {
        return Err(param("xi shifts must form a contiguous range without repeats"));
    }
    let z_klo = z.z_initial(k_lo).ok_or_else(|| Error::Range(format!("z(0) unknown at k = {k_lo}")))?;
    let z_khi = z.z_initial(k_hi).ok_or_else(|| Error::Range(format!("z(0) unknown at k = {k_hi}")))?;
    let mut report = EnvelopeReport { checked: 0, violations: Vec::new(), uncertified: 0, events: z.jump_count() };
    for &t in times {
        for i in w.lo..=w.hi {
            let zi = z.z(i, t).ok_or_else(|| Error::Range(format!("time {t} outside the trajectory")))?;
            let mut sup = i64::MIN;
            let mut argmax = k_lo;
            for x in xis {
                let k = x.shift();
                let xi = x.xi(i - k, t).ok_or_else(|| Error::Range(format!("xi^{k} lacks index {}", i - k)))?;
                let v = z.z_initial(k).ok_or_else(|| Error::Range(format!("z(0) unknown at {k}")))? - xi;
                if v > sup {
                    sup = v;
                    argmax = k;
                }
            }
            // terms with k outside the range are bounded by their t = 0 values,
            // which are monotone in the distance from i
            let outside = if k_hi >= i {
                z_klo.max(z_khi - (k_hi - i))
            } else {
                z_klo.max(z.z_initial(i).unwrap_or(i64::MAX))
            };
            report.checked += 1;
            if outside > zi {
                report.uncertified += 1;
            }
            if sup != zi {
                report.violations.push(EnvelopeViolation { site: i, time: t, z: zi, sup, argmax });
            }
        }
    }
    Ok(report)
}

/// Parameters of the coupled envelope experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSetup {
    pub sites: usize,
    pub horizon: f64,
    pub n: u64,
    pub speed: SpeedFunction,
    pub initial: InitialData,
    pub samples: usize,
    /// 0 for shared clocks; any other value makes every ξ read a shifted clock
    pub clock_offset: i64,
}

impl Default for EnvelopeSetup {
    fn default() -> Self {
        EnvelopeSetup {
            sites: 40,
            horizon: 20.0,
            n: 1,
            speed: SpeedFunction::constant(1.0).expect("unit speed"),
            initial: InitialData::Step,
            samples: 200,
            clock_offset: 0,
        }
    }
}

/// Simulates z and the ξ family on shared clocks and runs [`envelope_check`].
pub fn envelope_experiment(setup: &EnvelopeSetup, rng: RngSpec) -> Result<EnvelopeReport> {
    if setup.sites == 0 || setup.samples == 0 {
        return Err(param("envelope experiment needs sites and samples"));
    }
    let half = setup.sites as i64 / 2;
    let window = Window::new(-half, setup.sites as i64 - half - 1)?;
    let clocks = ClockStream::new(rng.substream(1), setup.speed.clone(), setup.n);
    let run = TasepRun {
        speed: setup.speed.clone(),
        n: setup.n,
        initial: setup.initial.clone(),
        horizon: setup.horizon,
        window,
    };
    let z = simulate_with_clocks(&run, &clocks, rng.substream(0))?;
    let reach = default_buffer(setup.speed.max_rate(), setup.horizon);
    let xi_clocks = clocks.with_offset(setup.clock_offset);
    let xis: Vec<XiTrajectory> = (window.lo - reach..=window.hi + reach)
        .map(|k| simulate_xi(k, &xi_clocks, setup.horizon, (window.lo - k, window.hi - k), None))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..setup.samples)
        .map(|s| setup.horizon * s as f64 / (setup.samples.max(2) - 1) as f64)
        .collect();
    envelope_check(&z, &xis, &times)
}

/// Two-sample comparison of corner last-passage times with TASEP passage times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingReport {
    pub m: usize,
    pub n: usize,
    pub lpp: Estimate,
    pub tasep: Estimate,
    pub ks: KSResult,
}

impl CouplingReport {
    pub fn mean_gap_in_stderrs(&self) -> f64 {
        let pooled = (self.lpp.stderr.powi(2) + self.tasep.stderr.powi(2)).sqrt();
        if pooled == 0.0 {
            return if self.lpp.mean == self.tasep.mean { 0.0 } else { f64::INFINITY };
        }
        (self.lpp.mean - self.tasep.mean).abs() / pooled
    }
}

/// Time for particle `n` (started at −n under step data) to reach site m − n,
/// i.e. the n-th jump across the bond (m−n−1, m−n).
pub fn tasep_passage_time(m: usize, n: usize, clocks: &ClockStream) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(param("particle index and distance must be at least 1"));
    }
    let bond = m as i64 - n as i64 - 1;
    let mut buffer = 16 + 2 * (m + n) as i64;
    loop {
        let lo = -(n as i64) - buffer;
        let hi = m as i64 + buffer;
        let state = InitialData::Step.heights(lo - 1, hi + 1, 1, &RngSpec::new(0, 0));
        let mut engine = Engine { lo, state, clock_shift: 0, clocks, rule: Rule::Exclusion };
        let mut crossings = 0;
        let mut hit = None;
        let res = engine.run(f64::INFINITY, (bond, bond + 1), |s, t, _| {
            if s == bond {
                crossings += 1;
                if crossings == n {
                    hit = Some(t);
                    return true;
                }
            }
            false
        });
        match res {
            Ok(_) => return hit.ok_or_else(|| Error::Domain("clocks ran out before the passage".into())),
            Err(Error::WindowOverflow(_)) if buffer < 1 << 20 => buffer *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// Corner passage time G(m, n) over [1, m] × [1, n] including the first weight.
fn corner_time(m: usize, n: usize, spec: &RngSpec) -> Result<f64> {
    let g = WeightGrid::generate(
        Region::Rectangle { m: m - 1, n: n - 1 },
        crate::env::Distribution::Exponential { speed: SpeedFunction::constant(1.0)?, n: 1, shift: 0 },
        *spec,
    )?;
    corner_passage_time(&g, Origin::Include)
}

/// Compares G(m, n) against the TASEP passage time of particle n to site
/// m − n, each from `replicas` independent runs with unit rates.
pub fn lpp_coupling_check(m: usize, n: usize, replicas: usize, rng: RngSpec) -> Result<CouplingReport> {
    if m == 0 || n == 0 {
        return Err(param("coupling needs m, n >= 1"));
    }
    let unit = SpeedFunction::constant(1.0)?;
    // the two samples use disjoint substreams of each replica's stream
    let lpp = collect_replicas(|spec| corner_time(m, n, &spec.substream(1)), replicas, rng.base_seed)?;
    let tasep = collect_replicas(
        |spec| tasep_passage_time(m, n, &ClockStream::new(spec.substream(2), unit.clone(), 1)),
        replicas,
        rng.base_seed,
    )?;
    Ok(CouplingReport {
        m,
        n,
        lpp: Estimate::from_samples(&lpp, rng.base_seed)?,
        tasep: Estimate::from_samples(&tasep, rng.base_seed)?,
        ks: two_sample_ks(&lpp, &tasep)?,
    })
}
