//! Exactly solvable quantities of the log-gamma polymer.
//!
//! Weights are reciprocals of Gamma variables: Y⁻¹ ~ Gamma(μ) in the bulk and,
//! for the stationary model, U⁻¹ ~ Gamma(θ) on the horizontal axis and
//! V⁻¹ ~ Gamma(μ−θ) on the vertical axis. The functions here cover the ratio
//! propagation, the explicit free energy p_μ(s,t), and the upper-tail rate
//! functions with their convex duals.
//!
//! The point-to-point rate J_{s,t} is the Legendre transform of
//! J*_{s,t}(ξ) = inf_{ξ<θ<μ} { t·Λ_θ(ξ) − s·Λ_{μ−θ}(−ξ) }, with
//! Λ_θ(ξ) = log Γ(θ−ξ) − log Γ(θ). Both optimizations are convex and are
//! solved through the first-order conditions.

use crate::error::{param, Error, Result};
use crate::mc::fit_power_exponent;
use crate::specfun::{
    golden_max, inv_digamma_with, lgamma, psi0, psi1, solve_monotone_root, Bracket, PrecisionPolicy,
};

/// Relative distance kept from the ends of the (ξ, μ) and (0, μ) intervals.
const EDGE: f64 = 1e-12;
/// Smallest dual variable used when solving for the rate-function maximizer.
const XI_FLOOR: f64 = 1e-9;

fn tight() -> PrecisionPolicy {
    PrecisionPolicy::tight()
}

/// Shape parameters of the stationary log-gamma polymer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGammaParams {
    pub mu: f64,
    pub theta: f64,
}

impl LogGammaParams {
    pub fn new(mu: f64, theta: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(param(format!("mu must be positive and finite, got {mu}")));
        }
        if !(theta > 0.0 && theta < mu) {
            return Err(param(format!("theta must lie in (0, {mu}), got {theta}")));
        }
        Ok(LogGammaParams { mu, theta })
    }
}

/// A point-to-point rate query; `xi` is only used by the dual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuery {
    pub s: f64,
    pub t: f64,
    pub r: f64,
    pub mu: f64,
    pub xi: Option<f64>,
}

impl RateQuery {
    pub fn point_rate(&self) -> Result<f64> {
        point_rate(self.s, self.t, self.r, self.mu)
    }

    pub fn dual_rate(&self) -> Result<f64> {
        let xi = self.xi.ok_or_else(|| param("rate query has no dual variable"))?;
        dual_rate(self.s, self.t, xi, self.mu)
    }
}

/// One step of the ratio recursion: inputs U (from the left), V (from below)
/// and the bulk weight Y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryCell {
    pub u: f64,
    pub v: f64,
    pub y: f64,
}

/// Outputs of a cell. `x` is built from the input pair, so it belongs to the
/// site diagonally below-left of the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutput {
    pub u: f64,
    pub v: f64,
    pub x: f64,
}

impl StationaryCell {
    pub fn new(u: f64, v: f64, y: f64) -> Result<Self> {
        for (name, w) in [("U", u), ("V", v), ("Y", y)] {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {w}")));
            }
        }
        Ok(StationaryCell { u, v, y })
    }

    pub fn outputs(&self) -> CellOutput {
        let StationaryCell { u, v, y } = *self;
        CellOutput { u: y * (1.0 + u / v), v: y * (1.0 + v / u), x: 1.0 / (1.0 / u + 1.0 / v) }
    }
}

/// Ratio fields over [0, m] × [0, n].
///
/// U(i, j) is defined for i ≥ 1, V(i, j) for j ≥ 1 and X(i, j) for
/// 0 ≤ i < m, 0 ≤ j < n.
#[derive(Debug, Clone, PartialEq)]
pub struct BurkeField {
    m: usize,
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    x: Vec<f64>,
}

impl BurkeField {
    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Z(i, j) / Z(i−1, j)
    pub fn u(&self, i: i64, j: i64) -> Option<f64> {
        (i >= 1 && j >= 0 && i as usize <= self.m && j as usize <= self.n)
            .then(|| self.u[(i as usize - 1) * (self.n + 1) + j as usize])
    }

    /// Z(i, j) / Z(i, j−1)
    pub fn v(&self, i: i64, j: i64) -> Option<f64> {
        (i >= 0 && j >= 1 && i as usize <= self.m && j as usize <= self.n)
            .then(|| self.v[i as usize * self.n + j as usize - 1])
    }

    pub fn x(&self, i: i64, j: i64) -> Option<f64> {
        (i >= 0 && j >= 0 && (i as usize) < self.m && (j as usize) < self.n)
            .then(|| self.x[i as usize * self.n + j as usize])
    }
}

/// Runs the ratio recursion from boundary weights U(i,0), V(0,j) and bulk
/// weights Y(i,j), i,j ≥ 1 (row-major, `y_bulk[(i−1)·n + (j−1)]`).
pub fn burke_propagate(u_row: &[f64], v_col: &[f64], y_bulk: &[f64]) -> Result<BurkeField> {
    let (m, n) = (u_row.len(), v_col.len());
    if y_bulk.len() != m * n {
        return Err(param(format!("bulk has {} weights, expected {}x{} = {}", y_bulk.len(), m, n, m * n)));
    }
    if let Some(w) = u_row.iter().chain(v_col).chain(y_bulk).find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::Domain(format!("weights must be positive and finite, found {w}")));
    }
    let mut u = vec![0.0; m * (n + 1)];
    let mut v = vec![0.0; (m + 1) * n];
    let mut x = vec![0.0; m * n];
    for i in 1..=m {
        u[(i - 1) * (n + 1)] = u_row[i - 1];
    }
    v[..n].copy_from_slice(v_col);
    for i in 1..=m {
        for j in 1..=n {
            let left_u = u[(i - 1) * (n + 1) + j - 1];
            let below_v = v[(i - 1) * n + j - 1];
            let out = StationaryCell { u: left_u, v: below_v, y: y_bulk[(i - 1) * n + j - 1] }.outputs();
            u[(i - 1) * (n + 1) + j] = out.u;
            v[i * n + j - 1] = out.v;
            x[(i - 1) * n + j - 1] = out.x;
        }
    }
    Ok(BurkeField { m, n, u, v, x })
}

/// E log Z^{(θ)}(m, n) = −mΨ0(θ) − nΨ0(μ−θ).
pub fn stationary_mean_log_z(m: usize, n: usize, params: &LogGammaParams) -> f64 {
    if m == 0 && n == 0 {
        return 0.0;
    }
    -(m as f64) * psi0(params.theta) - n as f64 * psi0(params.mu - params.theta)
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(param(format!("mu must be positive and finite, got {mu}")));
    }
    Ok(())
}

fn check_direction(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && t >= 0.0) || !s.is_finite() || !t.is_finite() {
        return Err(param(format!("direction ({s}, {t}) must be finite and nonnegative")));
    }
    if s == 0.0 && t == 0.0 {
        return Err(param("direction (0, 0) has no free energy"));
    }
    Ok(())
}

/// The θ solving tΨ1(μ−θ) = sΨ1(θ), for s, t > 0.
pub fn free_energy_theta(s: f64, t: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_direction(s, t)?;
    if s == 0.0 || t == 0.0 {
        return Err(param("characteristic direction is degenerate on the axes"));
    }
    if s == t {
        return Ok(mu / 2.0);
    }
    solve_monotone_root(
        |th| t * psi1(mu - th) - s * psi1(th),
        Bracket::new(mu * EDGE, mu * (1.0 - EDGE))?,
        &tight(),
    )
}

/// p_μ(s, t) = −(sΨ0(θ) + tΨ0(μ−θ)); on the axes, −(s+t)Ψ0(μ).
pub fn free_energy(s: f64, t: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_direction(s, t)?;
    if s == 0.0 || t == 0.0 {
        return Ok(-(s + t) * psi0(mu));
    }
    let th = free_energy_theta(s, t, mu)?;
    Ok(-(s * psi0(th) + t * psi0(mu - th)))
}

/// Cramér rate of a single log-weight, I_μ(r) = sup_ξ {rξ − log Γ(μ−ξ) + log Γ(μ)}.
pub fn cramer_rate(r: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !r.is_finite() {
        return Err(param(format!("r must be finite, got {r}")));
    }
    let w = inv_digamma_with(-r, &tight())?;
    Ok(-r * w - lgamma(w) + mu * r + lgamma(mu))
}

/// Upper-tail rate of a sum of ⌊nx⌋ log-weights exceeding nr.
pub fn boundary_rate(x: f64, r: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(param(format!("x must be finite and nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(if r >= 0.0 { r * mu } else { 0.0 });
    }
    if r <= -x * psi0(mu) {
        return Ok(0.0);
    }
    Ok(x * cramer_rate(r / x, mu)?)
}

/// Dual on the axes: x·(log Γ(μ−ξ) − log Γ(μ)).
fn boundary_dual(x: f64, xi: f64, mu: f64) -> f64 {
    x * (lgamma(mu - xi) - lgamma(mu))
}

/// θ minimizing t·Λ_θ(ξ) − s·Λ_{μ−θ}(−ξ) over (ξ, μ).
fn inner_theta(s: f64, t: f64, xi: f64, mu: f64) -> Result<f64> {
    let w = mu - xi;
    let d = |th: f64| t * (psi0(th - xi) - psi0(th)) + s * (psi0(mu - th + xi) - psi0(mu - th));
    solve_monotone_root(d, Bracket::new(xi + w * EDGE, mu - w * EDGE)?, &tight())
}

fn inner_objective(s: f64, t: f64, xi: f64, mu: f64, th: f64) -> f64 {
    t * (lgamma(th - xi) - lgamma(th)) - s * (lgamma(mu - th + xi) - lgamma(mu - th))
}

/// J*_{s,t}(ξ) evaluated directly from its variational formula.
pub fn dual_free_energy(s: f64, t: f64, xi: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_direction(s, t)?;
    check_xi(xi, mu)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    if s == 0.0 || t == 0.0 {
        return Ok(boundary_dual(s + t, xi, mu));
    }
    let th = inner_theta(s, t, xi, mu)?;
    Ok(inner_objective(s, t, xi, mu, th))
}

/// d/dξ J*_{s,t}(ξ), by the envelope theorem.
fn dual_slope(s: f64, t: f64, xi: f64, mu: f64) -> Result<f64> {
    let th = inner_theta(s, t, xi, mu)?;
    Ok(-t * psi0(th - xi) - s * psi0(mu - th + xi))
}

fn check_xi(xi: f64, mu: f64) -> Result<()> {
    if !(xi >= 0.0) {
        return Err(param(format!("dual variable must be nonnegative, got {xi}")));
    }
    if xi >= mu {
        return Err(Error::Divergence(format!("E Z^xi is infinite for xi = {xi} >= mu = {mu}")));
    }
    Ok(())
}

/// Upper-tail rate J_{s,t}(r) of log Z at macroscopic endpoint (s, t).
pub fn point_rate(s: f64, t: f64, r: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_direction(s, t)?;
    if !r.is_finite() {
        return Err(param(format!("r must be finite, got {r}")));
    }
    if s == 0.0 || t == 0.0 {
        return boundary_rate(s + t, r, mu);
    }
    if r <= free_energy(s, t, mu)? {
        return Ok(0.0);
    }
    let lo = mu * XI_FLOOR;
    if dual_slope(s, t, lo, mu)? >= r {
        return Ok((r * lo - dual_free_energy(s, t, lo, mu)?).max(0.0));
    }
    let xi = solve_monotone_root(
        |xi| dual_slope(s, t, xi, mu).map(|d| d - r).unwrap_or(f64::NAN),
        Bracket::new(lo, mu * (1.0 - EDGE))?,
        &tight(),
    )?;
    Ok((r * xi - dual_free_energy(s, t, xi, mu)?).max(0.0))
}

/// Free-endpoint rate at total length s, which equals J_{s/2, s/2}.
pub fn free_endpoint_rate(s: f64, r: f64, mu: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(param(format!("path length must be positive, got {s}")));
    }
    point_rate(s / 2.0, s / 2.0, r, mu)
}

/// J*_{s,t}(ξ) = sup_r {rξ − J_{s,t}(r)}, computed from the rate function.
pub fn dual_rate(s: f64, t: f64, xi: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_direction(s, t)?;
    check_xi(xi, mu)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    if s == 0.0 || t == 0.0 {
        return Ok(boundary_dual(s + t, xi, mu));
    }
    let p = free_energy(s, t, mu)?;
    let mut err = None;
    let mut obj = |r: f64| match point_rate(s, t, r, mu) {
        Ok(j) => r * xi - j,
        Err(e) => {
            err.get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    // r ↦ rξ − J(r) is concave and increasing up to the maximizer
    let mut width = 1.0;
    let mut expansions = 0;
    while obj(p + 2.0 * width) > obj(p + width) {
        width *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Divergence(format!("dual at xi = {xi} has no finite maximizer")));
        }
    }
    let (_, best) = golden_max(&mut obj, p, p + 2.0 * width, 1e-9 * (1.0 + p.abs() + width));
    if let Some(e) = err {
        return Err(e);
    }
    Ok(best.max(p * xi))
}

/// Limiting log-moment generating function of the exit-point boundary sum.
///
/// Returns +∞ outside the admissible branches.
pub fn kappa_star(a: f64, s: f64, t: f64, xi: f64, mu: f64, theta: f64) -> f64 {
    let h = lgamma(mu - theta + xi) - lgamma(mu - theta);
    if a >= -t && a <= 0.0 && xi >= 0.0 {
        (t + a) * h
    } else if a > 0.0 && a <= s && xi >= 0.0 && xi < theta {
        t * h + a * (lgamma(theta - xi) - lgamma(theta))
    } else {
        f64::INFINITY
    }
}

/// |s·Λ_θ(ξ) − t·Λ_{μ−θ}(−ξ) − sup_{−t≤a≤s} {a·u(θ) + J*_{(s,t)−a}(ξ)}|,
/// where the endpoint after exit is (s, t+a) for a ≤ 0 and (s−a, t) for a > 0,
/// and u(θ) is Λ_{μ−θ}(−ξ) or Λ_θ(ξ) on the two sides.
pub fn exit_decomposition_residual(s: f64, t: f64, xi: f64, theta: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    check_direction(s, t)?;
    if !(xi >= 0.0 && xi < theta && theta < mu) {
        return Err(param(format!("need 0 <= xi < theta < mu, got xi={xi}, theta={theta}, mu={mu}")));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let d = lgamma(theta - xi) - lgamma(theta);
    let h = lgamma(mu - theta + xi) - lgamma(mu - theta);
    let lhs = s * d - t * h;
    let mut err = None;
    let mut side = |a: f64| {
        let (u, ss, tt) = if a <= 0.0 { (h, s, t + a) } else { (d, s - a, t) };
        let jstar = if ss <= 0.0 && tt <= 0.0 { Ok(0.0) } else { dual_rate(ss.max(0.0), tt.max(0.0), xi, mu) };
        match jstar {
            Ok(j) => a * u + j,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    };
    // each half is concave in a: a linear term plus a concave function of (s, t)
    let mut best = side(-t).max(side(0.0)).max(side(s));
    if t > 0.0 {
        best = best.max(golden_max(&mut side, -t, 0.0, 1e-7 * t).1);
    }
    if s > 0.0 {
        best = best.max(golden_max(&mut side, 0.0, s, 1e-7 * s).1);
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok((lhs - best).abs())
}

/// Log-log slope of J_{1,1}(r₀ + ε) for ε ∈ [1e-3, 1e-1], r₀ = p_μ(1, 1).
pub fn cube_root_expansion_exponent(mu: f64) -> Result<f64> {
    let r0 = free_energy(1.0, 1.0, mu)?;
    let k = 13;
    let mut eps = Vec::with_capacity(k);
    let mut rate = Vec::with_capacity(k);
    for i in 0..k {
        let e = 10f64.powf(-3.0 + 2.0 * i as f64 / (k - 1) as f64);
        eps.push(e);
        rate.push(point_rate(1.0, 1.0, r0 + e, mu)?);
    }
    Ok(fit_power_exponent(&eps, &rate)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_theta_is_symmetric_on_the_diagonal() {
        // for s = t the minimizer is the midpoint of (ξ, μ)
        let th = inner_theta(1.0, 1.0, 0.4, 2.0).unwrap();
        assert!((th - 1.2).abs() < 1e-10);
    }

    #[test]
    fn slope_at_the_floor_is_the_free_energy() {
        let d = dual_slope(1.0, 3.0, 2.0 * XI_FLOOR, 2.0).unwrap();
        assert!((d - free_energy(1.0, 3.0, 2.0).unwrap()).abs() < 1e-7);
    }
}
