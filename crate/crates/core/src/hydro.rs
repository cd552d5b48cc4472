//! Macroscopic shapes for inhomogeneous TASEP.
//!
//! Two optimization problems live here. The wedge passage constant
//! Γ^q(x,y) maximizes ∫ γ(x′)/c(x₁ − q) over wedge paths, and the height
//! function v(x,t) maximizes v0(w(0)) − ∫ c(w) g(w′/c(w)) over trajectories.
//! For a piecewise-constant speed function both reduce to a finite search:
//! an optimal path is a chain of straight moves between neighbouring
//! discontinuities of c, with a vertical run (a stay, in the trajectory
//! picture) at each visited discontinuity. For a fixed chain the free
//! coordinates enter through a separable concave program with one linear
//! constraint, which is solved exactly by a Lagrange multiplier search.
//!
//! The two-phase closed forms (shape Φ, height v, density ρ) sit next to the
//! numerical optimizers so each can be checked against the other.

use crate::env::SpeedFunction;
use crate::error::{param, Error, Result};
use crate::specfun::golden_max;
use crate::tasep::DensityProfile;

/// Upper bound on the number of path templates examined by one optimization.
pub const MAX_TEMPLATES: usize = 1 << 16;

const WEDGE_SLACK: f64 = 1e-12;
const SNAP: f64 = 1e-12;

/// γ(x,y) = (√(x+y) + √y)², the homogeneous wedge passage constant.
pub fn gamma_wedge(x: f64, y: f64) -> Result<f64> {
    let scale = 1.0 + x.abs() + y.abs();
    if !(y >= -WEDGE_SLACK * scale) || !(x + y >= -WEDGE_SLACK * scale) || !x.is_finite() || !y.is_finite() {
        return Err(Error::Domain(format!("({x}, {y}) lies outside the wedge y ≥ 0, x ≥ −y")));
    }
    Ok(gamma_raw(x, y))
}

fn gamma_raw(x: f64, y: f64) -> f64 {
    ((x + y).max(0.0).sqrt() + y.max(0.0).sqrt()).powi(2)
}

/// g(y) = sup over ρ in [0,1] of ρ(1−ρ) − yρ.
pub fn g_legendre(y: f64) -> f64 {
    if y <= -1.0 {
        -y
    } else if y >= 1.0 {
        0.0
    } else {
        0.25 * (1.0 - y) * (1.0 - y)
    }
}

/// (c·f)*(y) = inf over ρ in [0,1] of yρ − cρ(1−ρ).
pub fn flux_conjugate(c: f64, y: f64) -> f64 {
    -c * g_legendre(y / c)
}

/// The same infimum taken over all real ρ.
pub fn quadratic_flux_conjugate(c: f64, y: f64) -> f64 {
    -(c - y) * (c - y) / (4.0 * c)
}

fn h(rho: f64) -> f64 {
    rho * (1.0 - rho)
}

/// Derived constants of the two-phase speed function c1 on x < 0, c2 on x ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhaseParams {
    pub c1: f64,
    pub c2: f64,
    /// c1 / c2
    pub c: f64,
    /// 2c − 1 − 2√(c(c−1))
    pub b: f64,
    /// left density whose flux equals the right capacity c2/4
    pub rho_star: f64,
    /// √(c1(c1 − c2))
    pub big_b: f64,
}

impl TwoPhaseParams {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
            return Err(param(format!("rates must be finite and positive, got c1={c1}, c2={c2}")));
        }
        if c1 < c2 {
            return Err(param(format!("two-phase closed forms need c1 ≥ c2, got c1={c1}, c2={c2}")));
        }
        let c = c1 / c2;
        // (2c−1)² − 4c(c−1) = 1, so the difference is the reciprocal of the sum
        let b = 1.0 / (2.0 * c - 1.0 + 2.0 * (c * (c - 1.0)).sqrt());
        let s = (1.0 - c2 / c1).sqrt();
        let rho_star = (c2 / c1) / (2.0 * (1.0 + s));
        Ok(TwoPhaseParams { c1, c2, c, b, rho_star, big_b: (c1 * (c1 - c2)).sqrt() })
    }

    /// D(ρ) = c2² − 4c1c2ρ(1−ρ)
    pub fn d(&self, rho: f64) -> f64 {
        self.c2 * self.c2 - 4.0 * self.c1 * self.c2 * h(rho)
    }

    /// D1(ρ) = c1² − 4c1c2ρ(1−ρ)
    pub fn d1(&self, rho: f64) -> f64 {
        self.c1 * self.c1 - 4.0 * self.c1 * self.c2 * h(rho)
    }
}

/// Limit of n⁻¹G(nx, ny) for the corner growth model with rate c1 in
/// columns left of the diagonal and c2 on and right of it.
pub fn two_phase_shape(x: f64, y: f64, c1: f64, c2: f64) -> Result<f64> {
    let p = TwoPhaseParams::new(c1, c2)?;
    if !(x >= 0.0) || !(y >= 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(Error::Domain(format!("shape needs x, y ≥ 0, got ({x}, {y})")));
    }
    let root = (x.sqrt() + y.sqrt()).powi(2);
    let b2 = p.b * p.b;
    Ok(if x <= b2 * y {
        root / c1
    } else if x < y {
        let ob = (1.0 + p.b) * (1.0 + p.b);
        let den = c1 * (1.0 - b2);
        x * (4.0 * p.c - ob) / den + y * (ob - 4.0 * p.c * b2) / den
    } else {
        root / c2
    })
}

/// A piecewise-linear macroscopic path.
///
/// `Wedge` paths run from (0,0) over s ∈ [0,1] with increments in the wedge;
/// `Trajectory` paths give a position w(s) for s ∈ [0,t].
#[derive(Debug, Clone, PartialEq)]
pub enum MacroPath {
    Wedge { knots: Vec<f64>, points: Vec<(f64, f64)> },
    Trajectory { knots: Vec<f64>, positions: Vec<f64> },
}

fn check_knots(knots: &[f64], len: usize, end: Option<f64>) -> Result<()> {
    if knots.len() != len || len < 2 {
        return Err(param(format!("a path needs at least two vertices and one knot per vertex, got {} knots for {len}", knots.len())));
    }
    if knots[0] != 0.0 || knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::NonMonotone("knots must start at 0 and increase strictly".into()));
    }
    if let Some(e) = end {
        if knots[len - 1] != e {
            return Err(param(format!("wedge paths end at s = {e}, got {}", knots[len - 1])));
        }
    }
    Ok(())
}

impl MacroPath {
    pub fn wedge(knots: Vec<f64>, points: Vec<(f64, f64)>) -> Result<Self> {
        check_knots(&knots, points.len(), Some(1.0))?;
        if points[0] != (0.0, 0.0) {
            return Err(param("wedge paths start at the origin"));
        }
        for w in points.windows(2) {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            gamma_wedge(dx, dy).map_err(|_| Error::Domain(format!("increment ({dx}, {dy}) leaves the wedge")))?;
        }
        Ok(MacroPath::Wedge { knots, points })
    }

    pub fn trajectory(knots: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        check_knots(&knots, positions.len(), None)?;
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(param("trajectory positions must be finite"));
        }
        Ok(MacroPath::Trajectory { knots, positions })
    }

    pub fn knots(&self) -> &[f64] {
        match self {
            MacroPath::Wedge { knots, .. } | MacroPath::Trajectory { knots, .. } => knots,
        }
    }

    pub fn wedge_points(&self) -> Option<&[(f64, f64)]> {
        match self {
            MacroPath::Wedge { points, .. } => Some(points),
            MacroPath::Trajectory { .. } => None,
        }
    }

    pub fn trajectory_positions(&self) -> Option<&[f64]> {
        match self {
            MacroPath::Trajectory { positions, .. } => Some(positions),
            MacroPath::Wedge { .. } => None,
        }
    }

    /// ∫ γ(x′(s)) / c(x₁(s) − q) ds.
    pub fn wedge_weight(&self, c: &SpeedFunction, q: f64) -> Result<f64> {
        let points = self.wedge_points().ok_or_else(|| param("wedge weight of a trajectory"))?;
        let shifted = c.shifted(q);
        let mut total = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let full = gamma_raw(b.0 - a.0, b.1 - a.1);
            for (lo, hi) in split_fractions(&shifted, a.0, b.0) {
                let rate = piece_rate(&shifted, a.0 + lo * (b.0 - a.0), a.0 + hi * (b.0 - a.0));
                total += (hi - lo) * full / rate;
            }
        }
        Ok(total)
    }

    /// ∫ c(w) g(w′/c(w)) ds.
    pub fn action(&self, c: &SpeedFunction) -> Result<f64> {
        let (knots, positions) = match self {
            MacroPath::Trajectory { knots, positions } => (knots, positions),
            MacroPath::Wedge { .. } => return Err(param("action of a wedge path")),
        };
        let mut total = 0.0;
        for k in 1..knots.len() {
            let (a, b) = (positions[k - 1], positions[k]);
            let tau = knots[k] - knots[k - 1];
            for (lo, hi) in split_fractions(c, a, b) {
                let rate = piece_rate(c, a + lo * (b - a), a + hi * (b - a));
                total += leg_cost((hi - lo) * (b - a), rate, (hi - lo) * tau);
            }
        }
        Ok(total)
    }
}

/// Fractions of the segment [a, b] cut at the breakpoints strictly inside it.
fn split_fractions(c: &SpeedFunction, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (lo, hi) = (a.min(b), a.max(b));
    let tol = SNAP * (1.0 + lo.abs().max(hi.abs()));
    let mut cuts: Vec<f64> = c
        .breakpoints()
        .iter()
        .filter(|&&bp| bp > lo + tol && bp < hi - tol)
        .map(|&bp| (bp - a) / (b - a))
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut prev = 0.0;
    for f in cuts {
        out.push((prev, f));
        prev = f;
    }
    out.push((prev, 1.0));
    out
}

/// Rate along a piece from `a` to `b` that crosses no breakpoint. A piece of
/// zero length within rounding of a breakpoint gets the lower adjacent rate.
fn piece_rate(c: &SpeedFunction, a: f64, b: f64) -> f64 {
    let tol = SNAP * (1.0 + a.abs().max(b.abs()));
    if (b - a).abs() <= tol {
        let bps = c.breakpoints();
        if let Some(k) = bps.iter().position(|bp| (bp - a).abs() <= tol) {
            return c.rates()[k].min(c.rates()[k + 1]);
        }
        return c.at(a);
    }
    c.rates()[c.piece(0.5 * (a + b))]
}

/// Cost r τ g(Δ/(rτ)) of moving Δ in time τ at rate r.
fn leg_cost(dx: f64, rate: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return (-dx).max(0.0);
    }
    rate * tau * g_legendre(dx / (rate * tau))
}

/// Default number of straight pieces allowed in an optimal path.
pub fn default_budget(c: &SpeedFunction) -> usize {
    2 * c.breakpoints().len() + 3
}

/// Walks over column indices moving to a neighbouring column at each step.
fn column_walks(
    ncols: usize,
    max_len: usize,
    first_ok: impl Fn(usize) -> bool,
    last_ok: impl Fn(usize) -> bool,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..ncols).filter(|&k| first_ok(k)).map(|k| vec![k]).collect();
    if max_len == 0 {
        return Ok(out);
    }
    while let Some(walk) = stack.pop() {
        let k = *walk.last().unwrap();
        if last_ok(k) {
            out.push(walk.clone());
            if out.len() > MAX_TEMPLATES {
                return Err(Error::Budget(format!("more than {MAX_TEMPLATES} path templates")));
            }
        }
        if walk.len() < max_len {
            for next in [k.wrapping_sub(1), k + 1] {
                if next < ncols {
                    let mut w = walk.clone();
                    w.push(next);
                    stack.push(w);
                }
            }
        }
    }
    Ok(out)
}

fn walk_len(budget: usize) -> usize {
    budget.saturating_sub(1) / 2
}

/// Whether `p` lies in the closed span of the two regions next to column k.
fn adjacent(cols: &[f64], k: usize, p: f64) -> bool {
    let lo = if k == 0 { f64::NEG_INFINITY } else { cols[k - 1] };
    let hi = cols.get(k + 1).copied().unwrap_or(f64::INFINITY);
    p >= lo && p <= hi
}

/// A straight piece of a template: horizontal displacement and rate.
#[derive(Debug, Clone, Copy)]
struct Piece {
    dx: f64,
    rate: f64,
}

/// Maximizes Σ γ(dx_j, b_j)/r_j over b_j ≥ max(0, −dx_j) with Σ b_j = y.
/// Returns the value and the heights, or `None` when infeasible.
fn allocate_height(pieces: &[Piece], y: f64) -> Option<(f64, Vec<f64>)> {
    let lower: Vec<f64> = pieces.iter().map(|p| (-p.dx).max(0.0)).collect();
    let sum_lower: f64 = lower.iter().sum();
    let tol = 1e-13 * (1.0 + y.abs());
    if sum_lower > y + tol {
        return None;
    }
    let value = |b: &[f64]| pieces.iter().zip(b).map(|(p, &bj)| gamma_raw(p.dx, bj) / p.rate).sum::<f64>();
    if sum_lower >= y - tol {
        return Some((value(&lower), lower));
    }
    // b_j(λ) solves ∂γ/∂b / r_j = λ; for dx ≠ 0 the marginal falls from ∞ to 4/r_j
    let height_at = |p: &Piece, lam: f64| -> f64 {
        if p.dx == 0.0 {
            return 0.0;
        }
        let k = lam * p.rate - 2.0;
        if k <= 2.0 {
            return f64::INFINITY;
        }
        let s = (k * k - 4.0).sqrt();
        if p.dx > 0.0 {
            p.dx * 2.0 / (s * (k + s))
        } else {
            -p.dx * 0.5 * (k / s + 1.0)
        }
    };
    let total = |lam: f64| pieces.iter().map(|p| height_at(p, lam)).sum::<f64>();
    let floor = pieces.iter().map(|p| 4.0 / p.rate).fold(0.0, f64::max);
    let at_floor = total(floor);
    let (lam, mut b) = if at_floor <= y {
        (floor, pieces.iter().map(|p| height_at(p, floor)).collect::<Vec<_>>())
    } else {
        let mut hi = 2.0 * floor;
        while total(hi) > y {
            hi *= 2.0;
        }
        let mut lo = floor;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (hi, pieces.iter().map(|p| height_at(p, hi)).collect::<Vec<_>>())
    };
    let rem = (y - b.iter().sum::<f64>()).max(0.0);
    // the remainder goes where the marginal value equals λ: a vertical at the
    // floor rate if one exists, otherwise (rem is rounding-sized) anywhere
    let slot = pieces
        .iter()
        .position(|p| p.dx == 0.0 && 4.0 / p.rate >= lam * (1.0 - 1e-12))
        .or_else(|| pieces.iter().position(|p| p.dx != 0.0))
        .unwrap_or(0);
    let base = value(&b);
    b[slot] += rem;
    Some((base + lam * rem, b))
}

/// Minimizes Σ r_j τ_j g(dx_j/(r_j τ_j)) over τ_j ≥ 0 with Σ τ_j = t.
fn allocate_time(pieces: &[Piece], t: f64) -> (f64, Vec<f64>) {
    let free: f64 = pieces.iter().filter(|p| p.dx != 0.0).map(|p| p.dx.abs() / p.rate).sum();
    if t <= free {
        // every move fits in its zero-marginal regime
        let cost = pieces.iter().map(|p| (-p.dx).max(0.0)).sum();
        let taus = pieces.iter().map(|p| if p.dx == 0.0 { 0.0 } else { p.dx.abs() / p.rate * t / free }).collect();
        return (cost, taus);
    }
    let tau_at = |p: &Piece, lam: f64| -> f64 {
        if p.dx == 0.0 {
            return 0.0;
        }
        let u = 1.0 - 4.0 * lam / p.rate;
        if u <= 0.0 {
            return f64::INFINITY;
        }
        p.dx.abs() / (p.rate * u.sqrt())
    };
    let total = |lam: f64| pieces.iter().map(|p| tau_at(p, lam)).sum::<f64>();
    let cap = pieces.iter().map(|p| p.rate / 4.0).fold(f64::INFINITY, f64::min);
    let (lam, mut taus) = if total(cap) <= t {
        (cap, pieces.iter().map(|p| tau_at(p, cap)).collect::<Vec<_>>())
    } else {
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, pieces.iter().map(|p| tau_at(p, lo)).collect::<Vec<_>>())
    };
    let rem = (t - taus.iter().sum::<f64>()).max(0.0);
    let base: f64 = pieces.iter().zip(&taus).map(|(p, &tj)| leg_cost(p.dx, p.rate, tj)).sum();
    let slot = pieces
        .iter()
        .position(|p| p.dx == 0.0 && p.rate / 4.0 <= lam * (1.0 + 1e-12))
        .or_else(|| pieces.iter().position(|p| p.dx != 0.0))
        .unwrap_or(0);
    taus[slot] += rem;
    (base + lam * rem, taus)
}

fn lsc_rate(c: &SpeedFunction, k: usize) -> f64 {
    c.rates()[k].min(c.rates()[k + 1])
}

/// Pieces of a chain start → cols[walk[0]] → … → cols[walk[m−1]] → end, with
/// a vertical at every visited column. `first_rate` is the rate of the
/// region holding `start`.
fn chain(c: &SpeedFunction, cols: &[f64], walk: &[usize], start: f64, first_rate: f64, end: f64) -> Vec<Piece> {
    let mut out = Vec::with_capacity(2 * walk.len() + 1);
    let mut pos = start;
    for (i, &k) in walk.iter().enumerate() {
        let rate = if i == 0 {
            first_rate
        } else {
            let prev = walk[i - 1];
            c.rates()[prev.max(k)]
        };
        out.push(Piece { dx: cols[k] - pos, rate });
        out.push(Piece { dx: 0.0, rate: lsc_rate(c, k) });
        pos = cols[k];
    }
    if let Some(&k) = walk.last() {
        let rate = if end < cols[k] { c.rates()[k] } else { c.rates()[k + 1] };
        out.push(Piece { dx: end - pos, rate });
    }
    out
}

/// Γ^q(x,y) with the default template budget.
pub fn gamma_q(x: f64, y: f64, q: f64, c: &SpeedFunction) -> Result<f64> {
    gamma_q_path(x, y, q, c, default_budget(c)).map(|(v, _)| v)
}

/// Γ^q(x,y) and an optimal wedge path, searching paths of at most `budget`
/// straight pieces.
pub fn gamma_q_path(x: f64, y: f64, q: f64, c: &SpeedFunction, budget: usize) -> Result<(f64, MacroPath)> {
    gamma_wedge(x, y)?;
    if !q.is_finite() {
        return Err(param("shift q must be finite"));
    }
    let cols: Vec<f64> = c.breakpoints().iter().map(|b| b + q).collect();
    let (lo, hi) = (0.0f64.min(x), 0.0f64.max(x));
    let mut best: Option<(f64, Vec<Piece>, Vec<f64>)> = None;
    let mut consider = |pieces: Vec<Piece>| {
        if let Some((v, heights)) = allocate_height(&pieces, y) {
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, pieces, heights));
            }
        }
    };
    if !cols.iter().any(|&d| d > lo && d < hi) {
        let rate = if x == 0.0 { c.at(-q) } else { c.rates()[c.piece(0.5 * x - q)] };
        consider(vec![Piece { dx: x, rate }]);
    }
    // columns a path to (x,y) can reach lie in [−y, x + y]
    let reach = |k: usize| cols[k] >= -y - WEDGE_SLACK && cols[k] <= x + y + WEDGE_SLACK;
    let walks = column_walks(cols.len(), walk_len(budget), |k| reach(k) && adjacent(&cols, k, 0.0), |k| reach(k) && adjacent(&cols, k, x))?;
    for walk in walks {
        if walk.iter().any(|&k| !reach(k)) {
            continue;
        }
        let first = walk[0];
        let first_rate = if 0.0 < cols[first] { c.rates()[first] } else { c.rates()[first + 1] };
        consider(chain(c, &cols, &walk, 0.0, first_rate, x));
    }
    let (value, pieces, heights) =
        best.ok_or_else(|| Error::Budget(format!("no admissible path to ({x}, {y}) within {budget} pieces")))?;
    let mut points = vec![(0.0, 0.0)];
    for (p, &b) in pieces.iter().zip(&heights) {
        let last = *points.last().unwrap();
        if p.dx != 0.0 || b != 0.0 {
            points.push((last.0 + p.dx, last.1 + b));
        }
    }
    if points.len() == 1 {
        points.push((0.0, 0.0));
    }
    let m = points.len() - 1;
    let knots = (0..=m).map(|k| k as f64 / m as f64).collect();
    let end = points.last_mut().unwrap();
    *end = (x, y);
    Ok((value, MacroPath::Wedge { knots, points }))
}

/// g^q(x,t) = inf{ y : Γ^q(x,y) ≥ t }.
pub fn g_level(x: f64, t: f64, q: f64, c: &SpeedFunction) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(param(format!("level needs t > 0, got {t}")));
    }
    let ymin = (-x).max(0.0);
    let f = |y: f64| gamma_q(x, y, q, c).map(|v| v - t);
    if f(ymin)? >= 0.0 {
        return Ok(ymin);
    }
    let mut step = t * c.max_rate() / 4.0 + 1.0;
    while f(ymin + step)? < 0.0 {
        step *= 2.0;
    }
    let (mut lo, mut hi) = (ymin, ymin + step);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// v(x,t) with the default template budget.
pub fn variational_v(x: f64, t: f64, rho0: &DensityProfile, c: &SpeedFunction) -> Result<f64> {
    variational_path(x, t, rho0, c, default_budget(c)).map(|(v, _)| v)
}

/// v(x,t) and an optimal trajectory ending at x.
///
/// For a fixed chain of visited discontinuities the cost is jointly convex in
/// the start point and the holding times, so the value is concave in the
/// start point within each region and each piece of ρ0, and a golden-section
/// search over that interval is exact up to its tolerance.
pub fn variational_path(x: f64, t: f64, rho0: &DensityProfile, c: &SpeedFunction, budget: usize) -> Result<(f64, MacroPath)> {
    if !(t > 0.0) || !t.is_finite() || !x.is_finite() {
        return Err(param(format!("variational height needs finite x and t > 0, got ({x}, {t})")));
    }
    let cols = c.breakpoints();
    let reach = c.max_rate() * t;
    let window = (x - reach, x + reach);
    let region = |k: usize| -> (f64, f64) {
        let lo = if k == 0 { f64::NEG_INFINITY } else { cols[k - 1] };
        let hi = cols.get(k).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    };

    // (start interval, rate of the start region, walk)
    let mut templates: Vec<((f64, f64), f64, Vec<usize>)> = Vec::new();
    for k in 0..=cols.len() {
        let (lo, hi) = region(k);
        if x >= lo && x <= hi {
            templates.push(((lo, hi), c.rates()[k], vec![]));
        }
    }
    let walks = column_walks(cols.len(), walk_len(budget), |_| true, |k| adjacent(cols, k, x))?;
    for walk in walks {
        let k = walk[0];
        templates.push((region(k), c.rates()[k], walk.clone()));
        templates.push((region(k + 1), c.rates()[k + 1], walk));
    }

    let mut best: Option<(f64, f64, Vec<Piece>, Vec<f64>)> = None;
    for ((lo, hi), first_rate, walk) in &templates {
        let (a, b) = (lo.max(window.0), hi.min(window.1));
        if a > b {
            continue;
        }
        let pieces_for = |q: f64| -> Vec<Piece> {
            if walk.is_empty() {
                vec![Piece { dx: x - q, rate: *first_rate }]
            } else {
                chain(c, cols, walk, q, *first_rate, x)
            }
        };
        let objective = |q: f64| rho0.antiderivative(q) - allocate_time(&pieces_for(q), t).0;
        let mut cuts = vec![a];
        cuts.extend(rho0.breakpoints().iter().copied().filter(|&p| p > a && p < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            let tol = 1e-12 * (1.0 + w[1] - w[0]);
            let (q, v) = if w[1] - w[0] <= tol { (w[0], objective(w[0])) } else { golden_max(objective, w[0], w[1], tol) };
            if best.as_ref().is_none_or(|bst| v > bst.0) {
                let pieces = pieces_for(q);
                let taus = allocate_time(&pieces, t).1;
                best = Some((v, q, pieces, taus));
            }
        }
    }
    let (value, q, pieces, taus) = best.ok_or_else(|| Error::Budget("no admissible trajectory".into()))?;
    let mut knots = vec![0.0];
    let mut positions = vec![q];
    let mut s = 0.0;
    for (p, &tau) in pieces.iter().zip(&taus) {
        if tau > 0.0 {
            s += tau;
            knots.push(s);
            positions.push(positions.last().unwrap() + p.dx);
        }
    }
    *knots.last_mut().unwrap() = t;
    *positions.last_mut().unwrap() = x;
    Ok((value, MacroPath::Trajectory { knots, positions }))
}

fn check_profile_args(rho: f64, t: f64, c1: f64, c2: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(param(format!("density must lie in [0, 1], got {rho}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(param(format!("time must be positive, got {t}")));
    }
    if !(c1 > 0.0) || !(c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(param("rates must be finite and positive"));
    }
    Ok(())
}

/// Closed-form height v(x,t) for constant initial density ρ and the two-phase
/// speed function; c1 < c2 goes through the particle–hole mirror image.
pub fn closed_form_v(x: f64, t: f64, rho: f64, c1: f64, c2: f64) -> Result<f64> {
    check_profile_args(rho, t, c1, c2)?;
    if c1 < c2 {
        // holes move left; mirrored they are particles in the system (c2, c1)
        return Ok(x + closed_form_v(-x, t, 1.0 - rho, c2, c1)?);
    }
    let p = TwoPhaseParams::new(c1, c2)?;
    let rs = p.rho_star;
    let gs = |c: f64, z: f64| t * c * g_legendre(z / (t * c));
    Ok(if x >= 0.0 {
        let r_plus = if rho <= 0.5 && x < t * c2 * (1.0 - 2.0 * rho) { -gs(c2, x) } else { rho * x - t * c2 * h(rho) };
        let d = p.d(rho);
        let l_plus = if rho < rs && x <= t * d.sqrt() {
            -t * c1 * h(rho) + x * (0.5 - d.sqrt() / (2.0 * c2))
        } else {
            -gs(c2, x)
        };
        r_plus.max(l_plus)
    } else {
        let bb = p.big_b;
        let mid = || -(t + x / bb) * c2 / 4.0 + x * c1 / (4.0 * bb) * (1.0 + bb / c1).powi(2);
        let lin = rho * x - t * c1 * h(rho);
        let l_minus = if rho < rs {
            lin
        } else if rho <= 0.5 {
            if x <= -t * c1 * (rho - rs) {
                lin
            } else {
                mid()
            }
        } else if rho <= 1.0 - rs {
            if x < -t * c1 * (rho - rs) {
                lin
            } else {
                mid()
            }
        } else if x >= -bb * t {
            mid()
        } else if x >= -c1 * t * (2.0 * rho - 1.0) {
            -gs(c1, x)
        } else {
            lin
        };
        let d1 = p.d1(rho);
        let r_minus = if rho <= 0.5 || x < -t * d1.sqrt() {
            -gs(c1, x)
        } else {
            -t * c2 * h(rho) + x * (0.5 + d1.sqrt() / (2.0 * c1))
        };
        r_minus.max(l_minus)
    })
}

/// A point (ρ, x, t) at which a density profile is queried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileQuery {
    pub rho: f64,
    pub x: f64,
    pub t: f64,
}

impl ProfileQuery {
    pub fn new(rho: f64, x: f64, t: f64) -> Result<Self> {
        check_profile_args(rho, t, 1.0, 1.0)?;
        if !x.is_finite() {
            return Err(param("position must be finite"));
        }
        Ok(ProfileQuery { rho, x, t })
    }
}

/// A macroscopic density field ρ(x,t).
pub trait Profile {
    fn density(&self, x: f64, t: f64) -> f64;

    /// Known discontinuities at time t; used to split quadrature panels.
    fn jumps(&self, _t: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// A profile given by a closure.
pub struct FnProfile<F>(pub F);

impl<F: Fn(f64, f64) -> f64> Profile for FnProfile<F> {
    fn density(&self, x: f64, t: f64) -> f64 {
        (self.0)(x, t)
    }
}

/// The initial state of a profile held fixed for all times.
pub struct Frozen<'a, P: ?Sized>(pub &'a P);

impl<P: Profile + ?Sized> Profile for Frozen<'_, P> {
    fn density(&self, x: f64, _t: f64) -> f64 {
        self.0.density(x, 0.0)
    }

    fn jumps(&self, _t: f64) -> Vec<f64> {
        self.0.jumps(0.0)
    }
}

/// Entropy solution from constant density ρ under the two-phase speed function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhaseProfile {
    rho: f64,
    params: TwoPhaseParams,
    /// computed as 1 − ρ̃(−x) for the mirrored system when c1 < c2
    mirrored: bool,
}

impl TwoPhaseProfile {
    pub fn new(rho: f64, c1: f64, c2: f64) -> Result<Self> {
        check_profile_args(rho, 1.0, c1, c2)?;
        if c1 >= c2 {
            Ok(TwoPhaseProfile { rho, params: TwoPhaseParams::new(c1, c2)?, mirrored: false })
        } else {
            Ok(TwoPhaseProfile { rho: 1.0 - rho, params: TwoPhaseParams::new(c2, c1)?, mirrored: true })
        }
    }

    /// r*(ρ) of the interface plateau, in the (c1 ≥ c2) frame.
    fn r_star(&self) -> f64 {
        let (rho, p) = (self.rho, &self.params);
        if rho < p.rho_star {
            0.5 - 0.5 * (1.0 - 4.0 * h(rho) * p.c1 / p.c2).max(0.0).sqrt()
        } else if rho > 0.5 {
            0.5 - 0.5 * (1.0 - 4.0 * h(rho) * p.c2 / p.c1).max(0.0).sqrt()
        } else {
            p.rho_star
        }
    }

    fn raw(&self, x: f64, t: f64) -> f64 {
        let (rho, p) = (self.rho, &self.params);
        if t <= 0.0 {
            return rho;
        }
        let fan = |x: f64| 0.5 * (1.0 - x / (t * p.c2));
        let r = self.r_star();
        if rho < p.rho_star {
            if x < 0.0 {
                rho
            } else if x <= p.c2 * (1.0 - 2.0 * r) * t {
                r
            } else if x <= p.c2 * (1.0 - 2.0 * rho) * t {
                fan(x)
            } else {
                rho
            }
        } else if rho <= 0.5 {
            if x < -t * p.c1 * (rho - p.rho_star) {
                rho
            } else if x < 0.0 {
                1.0 - p.rho_star
            } else if x <= (1.0 - 2.0 * rho) * t * p.c2 {
                fan(x)
            } else {
                rho
            }
        } else if x < -t * p.c1 * (rho - r) {
            rho
        } else if x < 0.0 {
            1.0 - r
        } else {
            rho
        }
    }

    fn raw_breaks(&self, t: f64, with_kinks: bool) -> Vec<f64> {
        let (rho, p) = (self.rho, &self.params);
        let r = self.r_star();
        let mut out = if rho < p.rho_star {
            if with_kinks {
                vec![0.0, p.c2 * (1.0 - 2.0 * r) * t, p.c2 * (1.0 - 2.0 * rho) * t]
            } else {
                vec![0.0]
            }
        } else if rho <= 0.5 {
            let mut v = vec![-t * p.c1 * (rho - p.rho_star), 0.0];
            if with_kinks {
                v.push((1.0 - 2.0 * rho) * t * p.c2);
            }
            v
        } else {
            vec![-t * p.c1 * (rho - r), 0.0]
        };
        if self.mirrored {
            out = out.into_iter().rev().map(|b| -b).collect();
        }
        out
    }

    /// All branch boundaries at time t, shocks included.
    pub fn kinks(&self, t: f64) -> Vec<f64> {
        self.raw_breaks(t, true)
    }
}

impl Profile for TwoPhaseProfile {
    fn density(&self, x: f64, t: f64) -> f64 {
        if self.mirrored {
            1.0 - self.raw(-x, t)
        } else {
            self.raw(x, t)
        }
    }

    fn jumps(&self, t: f64) -> Vec<f64> {
        self.raw_breaks(t, false)
    }
}

/// ρ(x,t) for constant initial density ρ and the two-phase speed function.
pub fn two_phase_profile(rho: f64, c1: f64, c2: f64, x: f64, t: f64) -> Result<f64> {
    let q = ProfileQuery::new(rho, x, t)?;
    Ok(TwoPhaseProfile::new(q.rho, c1, c2)?.density(q.x, q.t))
}

/// A discontinuity of a profile with its one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

/// Outcome of the interior and boundary entropy checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    /// density never decreases across a discontinuity away from x = 0
    pub interior: bool,
    /// the characteristic speeds at x = 0 avoid the pattern (right > 0, left < 0)
    pub boundary: bool,
    /// |c1 h(ρ(0−)) − c2 h(ρ(0+))|
    pub flux_residual: f64,
    pub left_limit: f64,
    pub right_limit: f64,
    pub shocks: Vec<Jump>,
}

impl EntropyReport {
    pub fn passed_with(&self, flux_tol: f64) -> bool {
        self.interior && self.boundary && self.flux_residual <= flux_tol
    }

    pub fn passed(&self) -> bool {
        self.passed_with(1e-10)
    }
}

/// Checks a profile at time t: jumps are located on a fine scan and refined
/// by bisection; a gap that survives refinement is a discontinuity.
pub fn entropy_check<P: Profile + ?Sized>(profile: &P, c1: f64, c2: f64, t: f64) -> EntropyReport {
    const STEPS: usize = 20_000;
    const JUMP: f64 = 1e-6;
    const TOL: f64 = 1e-9;
    let half = 2.0 * c1.max(c2) * t + 1.0;
    let dx = 2.0 * half / STEPS as f64;
    let f = |x: f64| profile.density(x, t);
    let mut shocks: Vec<Jump> = Vec::new();
    let mut prev = (-half, f(-half));
    for k in 1..=STEPS {
        let x = -half + k as f64 * dx;
        let cur = (x, f(x));
        if (cur.1 - prev.1).abs() > JUMP {
            let (mut a, mut b) = (prev, cur);
            for _ in 0..80 {
                let m = 0.5 * (a.0 + b.0);
                if m <= a.0 || m >= b.0 {
                    break;
                }
                let fm = f(m);
                if (fm - a.1).abs() >= (b.1 - fm).abs() {
                    b = (m, fm);
                } else {
                    a = (m, fm);
                }
            }
            let at = 0.5 * (a.0 + b.0);
            if (b.1 - a.1).abs() > JUMP && at.abs() > 1e-9 {
                shocks.push(Jump { x: at, left: a.1, right: b.1 });
            }
        }
        prev = cur;
    }
    let eps = 1e-13;
    let (left, right) = (f(-eps), f(eps));
    let dl = c1 * (1.0 - 2.0 * left);
    let dr = c2 * (1.0 - 2.0 * right);
    EntropyReport {
        interior: shocks.iter().all(|j| j.right >= j.left - TOL),
        boundary: !(dr > TOL && dl < -TOL),
        flux_residual: (c1 * h(left) - c2 * h(right)).abs(),
        left_limit: left,
        right_limit: right,
        shocks,
    }
}

/// Smooth compactly supported test function ψ((x−x0)/rx) ψ((t−t0)/rt) with
/// ψ(s) = (1 − s²)² on |s| < 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub x0: f64,
    pub t0: f64,
    pub rx: f64,
    pub rt: f64,
}

fn psi(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        (0.0, 0.0)
    } else {
        let u = 1.0 - s * s;
        (u * u, -4.0 * s * u)
    }
}

impl Bump {
    pub fn new(x0: f64, t0: f64, rx: f64, rt: f64) -> Result<Self> {
        if !(rx > 0.0) || !(rt > 0.0) {
            return Err(param("bump radii must be positive"));
        }
        Ok(Bump { x0, t0, rx, rt })
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        psi((x - self.x0) / self.rx).0 * psi((t - self.t0) / self.rt).0
    }

    /// (∂φ/∂x, ∂φ/∂t)
    pub fn gradient(&self, x: f64, t: f64) -> (f64, f64) {
        let (px, dpx) = psi((x - self.x0) / self.rx);
        let (pt, dpt) = psi((t - self.t0) / self.rt);
        (dpx / self.rx * pt, px * dpt / self.rt)
    }
}

/// Composite Gauss–Legendre rule: `panels` panels of `order` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub panels: usize,
    pub order: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { panels: 100, order: 4 }
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// ∫ f over [a, b] split at `cuts`, with panels spread in proportion to length.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, cuts: &[f64], panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut edges = vec![a];
    let mut inner: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    inner.sort_by(f64::total_cmp);
    edges.extend(inner);
    edges.push(b);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let len = w[1] - w[0];
        let n = ((panels as f64 * len / (b - a)).round() as usize).max(1);
        let hp = len / n as f64;
        for k in 0..n {
            let mid = w[0] + (k as f64 + 0.5) * hp;
            for (x, wt) in rule.0.iter().zip(&rule.1) {
                total += wt * 0.5 * hp * f(mid + 0.5 * hp * x);
            }
        }
    }
    total
}

/// Largest |∫∫ (ρ φ_t + F(x,ρ) φ_x) dx dt + ∫ ρ(x,0) φ(x,0) dx| over the test
/// functions, with F = c1 h on x < 0 and c2 h on x ≥ 0. The x-integrals are
/// split at the profile's declared jumps and at the interface.
pub fn weak_solution_residual<P: Profile + ?Sized>(
    profile: &P,
    c1: f64,
    c2: f64,
    tests: &[Bump],
    quad: &Quadrature,
) -> Result<f64> {
    if quad.panels == 0 || quad.order == 0 {
        return Err(param("quadrature needs at least one panel and one node"));
    }
    if tests.is_empty() {
        return Err(param("no test functions given"));
    }
    if !(c1 > 0.0) || !(c2 > 0.0) {
        return Err(param("rates must be positive"));
    }
    let rule = gauss_legendre(quad.order);
    let flux = |x: f64, rho: f64| if x < 0.0 { c1 } else { c2 } * h(rho);
    let mut worst: f64 = 0.0;
    for bump in tests {
        let (xa, xb) = (bump.x0 - bump.rx, bump.x0 + bump.rx);
        let (ta, tb) = ((bump.t0 - bump.rt).max(0.0), bump.t0 + bump.rt);
        let slice = |t: f64| -> f64 {
            let mut cuts = profile.jumps(t);
            cuts.push(0.0);
            let integrand = |x: f64| {
                let rho = profile.density(x, t);
                let (px, pt) = bump.gradient(x, t);
                rho * pt + flux(x, rho) * px
            };
            integrate(&integrand, xa, xb, &cuts, quad.panels, &rule)
        };
        let mut total = integrate(&slice, ta, tb, &[bump.t0], quad.panels, &rule);
        if bump.t0 - bump.rt < 0.0 {
            let mut cuts = profile.jumps(0.0);
            cuts.push(0.0);
            let initial = |x: f64| profile.density(x, 0.0) * bump.value(x, 0.0);
            total += integrate(&initial, xa, xb, &cuts, quad.panels, &rule);
        }
        worst = worst.max(total.abs());
    }
    Ok(worst)
}
