//! Log-gamma, digamma, trigamma, the inverse digamma and a bracketed
//! monotone root finder.
//!
//! The three gamma-family functions shift their argument upward with the
//! functional recurrence until it exceeds [`ASYMPTOTIC_THRESHOLD`], then sum a
//! fixed-length asymptotic series. Absolute accuracy is a few ulps of the
//! result's magnitude over the whole positive axis.

use crate::error::{Error, Result};

/// Arguments at or above this value go straight to the asymptotic series.
pub const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Tolerances shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionPolicy {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy { abs_tol: 1e-12, rel_tol: 1e-12, max_iter: 200 }
    }
}

impl PrecisionPolicy {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iter == 0 {
            return Err(Error::Parameter(format!(
                "precision policy needs abs_tol>0, rel_tol>0, max_iter>=1 (got {abs_tol}, {rel_tol}, {max_iter})"
            )));
        }
        Ok(PrecisionPolicy { abs_tol, rel_tol, max_iter })
    }

    /// Policy used internally where a root feeds further optimization.
    pub fn tight() -> Self {
        PrecisionPolicy { abs_tol: 1e-300, rel_tol: 4.0 * f64::EPSILON, max_iter: 400 }
    }
}

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Parameter(format!("bracket needs finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Bracket { lo, hi })
    }
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires finite x > 0, got {x}")))
    }
}

/// ln Γ(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive(x, "log_gamma")?;
    Ok(lgamma(x))
}

/// Ψ0(x) = d/dx ln Γ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x, "digamma")?;
    Ok(psi0(x))
}

/// Ψ1(x) = d²/dx² ln Γ(x) for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive(x, "trigamma")?;
    Ok(psi1(x))
}

/// Unchecked ln Γ; callers guarantee `x > 0`.
pub(crate) fn lgamma(x: f64) -> f64 {
    let mut z = x;
    let mut prod = 1.0;
    let mut log_acc = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        prod *= z;
        // keep the running product away from underflow for tiny x
        if prod < 1e-200 {
            log_acc += prod.ln();
            prod = 1.0;
        }
        z += 1.0;
    }
    log_acc += prod.ln();
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    let series = zi
        * (1.0 / 12.0
            + zi2
                * (-1.0 / 360.0
                    + zi2
                        * (1.0 / 1260.0
                            + zi2
                                * (-1.0 / 1680.0
                                    + zi2
                                        * (1.0 / 1188.0
                                            + zi2
                                                * (-691.0 / 360360.0
                                                    + zi2 * (1.0 / 156.0 + zi2 * (-3617.0 / 122400.0))))))));
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series - log_acc
}

/// Unchecked Ψ0; callers guarantee `x > 0`.
pub(crate) fn psi0(x: f64) -> f64 {
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let zi2 = 1.0 / (z * z);
    let series = zi2
        * (1.0 / 12.0
            - zi2
                * (1.0 / 120.0
                    - zi2
                        * (1.0 / 252.0
                            - zi2
                                * (1.0 / 240.0
                                    - zi2 * (1.0 / 132.0 - zi2 * (691.0 / 32760.0 - zi2 / 12.0))))));
    acc + z.ln() - 0.5 / z - series
}

/// Unchecked Ψ1; callers guarantee `x > 0`.
pub(crate) fn psi1(x: f64) -> f64 {
    let mut z = x;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    let series = zi
        + 0.5 * zi2
        + zi * zi2
            * (1.0 / 6.0
                + zi2
                    * (-1.0 / 30.0
                        + zi2
                            * (1.0 / 42.0
                                + zi2
                                    * (-1.0 / 30.0
                                        + zi2 * (5.0 / 66.0 + zi2 * (-691.0 / 2730.0 + zi2 * 7.0 / 6.0))))));
    acc + series
}

/// The unique x > 0 with Ψ0(x) = y, using the default policy.
pub fn inv_digamma(y: f64) -> Result<f64> {
    inv_digamma_with(y, &PrecisionPolicy::default())
}

/// Inverse digamma with an explicit policy.
///
/// Newton steps on Ψ0 (derivative Ψ1) safeguarded by a bracket that is
/// narrowed at every iterate; a step leaving the bracket is replaced by
/// bisection.
pub fn inv_digamma_with(y: f64, policy: &PrecisionPolicy) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::Domain(format!("inv_digamma requires finite y, got {y}")));
    }
    let mut x = if y >= -2.22 { y.exp() + 0.5 } else { -1.0 / (y + 0.577_215_664_901_532_9) };
    let (mut lo, mut hi) = (x, x);
    let mut guard = 0;
    while psi0(lo) > y {
        lo *= 0.5;
        guard += 1;
        if guard > 2100 {
            return Err(Error::IterationLimit(guard));
        }
    }
    while psi0(hi) < y {
        hi *= 2.0;
        guard += 1;
        if guard > 2100 || !hi.is_finite() {
            return Err(Error::IterationLimit(guard));
        }
    }
    for _ in 0..policy.max_iter {
        let f = psi0(x) - y;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let mut next = x - f / psi1(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= policy.rel_tol * x || hi - lo <= policy.rel_tol * x {
            let fx = (psi0(x) - y).abs();
            if fx <= policy.abs_tol * y.abs().max(1.0) || step <= 4.0 * f64::EPSILON * x {
                return Ok(x);
            }
        }
    }
    Err(Error::IterationLimit(policy.max_iter))
}

/// Root of a function with a sign change on `bracket`.
///
/// Illinois-modified regula falsi; an iteration that fails to halve the
/// bracket is followed by a plain bisection step, so convergence is never
/// slower than bisection by more than a factor of two.
pub fn solve_monotone_root<F>(mut f: F, bracket: Bracket, policy: &PrecisionPolicy) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Domain(format!("function not finite on bracket [{a}, {b}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo: a, hi: b, flo: fa, fhi: fb });
    }
    // side: -1 if `a` was retained last time, +1 if `b` was
    let mut side = 0i8;
    let mut force_bisect = false;
    for _ in 0..policy.max_iter {
        let width = b - a;
        let scale = a.abs().min(b.abs());
        if width <= policy.abs_tol.max(policy.rel_tol * scale) {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        let mut c = if force_bisect || !fa.is_finite() || !fb.is_finite() {
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc.is_nan() {
            return Err(Error::Domain(format!("function returned NaN at {c}")));
        }
        if fc == 0.0 || fc.abs() <= policy.abs_tol {
            return Ok(c);
        }
        let old_width = width;
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        force_bisect = !force_bisect && (b - a) > 0.5 * old_width;
    }
    Err(Error::IterationLimit(policy.max_iter))
}

/// Maximize a unimodal function on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    if fa > best.1 {
        best = (a, fa);
    }
    if fb > best.1 {
        best = (b, fb);
    }
    best
}
