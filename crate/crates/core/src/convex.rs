//! Grid-based convex analysis: Legendre transforms, infimal convolution and
//! one-sided Cramér rate functions.
//!
//! Functions live on explicit finite grids. The value `f64::INFINITY` marks
//! points outside the effective domain; such points may only appear as runs at
//! either end of the grid. In sums `+∞` dominates, and maxima skip it.

use crate::error::{Error, Result};
use crate::specfun::golden_max;

/// Default number of grid points for 1-d concave searches.
pub const DEFAULT_GRID: usize = 2001;

/// A function sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    xs: Vec<f64>,
    ys: Vec<f64>,
    domain_lo: f64,
    domain_hi: f64,
}

impl GridFunction {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Parameter(format!("grid has {} xs but {} ys", xs.len(), ys.len())));
        }
        if xs.len() < 2 {
            return Err(Error::Parameter("grid needs at least two points".into()));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("grid abscissae must be finite and strictly increasing".into()));
        }
        if ys.iter().any(|y| y.is_nan() || *y == f64::NEG_INFINITY) {
            return Err(Error::Parameter("grid values must be finite or +inf".into()));
        }
        let first = ys.iter().position(|y| y.is_finite());
        let last = ys.iter().rposition(|y| y.is_finite());
        let (domain_lo, domain_hi) = match (first, last) {
            (Some(a), Some(b)) => {
                if ys[a..=b].iter().any(|y| !y.is_finite()) {
                    return Err(Error::Parameter("+inf values are allowed only at the grid edges".into()));
                }
                (xs[a], xs[b])
            }
            _ => (f64::INFINITY, f64::NEG_INFINITY),
        };
        Ok(GridFunction { xs, ys, domain_lo, domain_hi })
    }

    /// Samples `f` at `xs`; non-finite results become `+∞`.
    pub fn from_fn(xs: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let ys = xs
            .iter()
            .map(|&x| {
                let y = f(x);
                if y.is_finite() {
                    y
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        GridFunction::new(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Bounds of the effective domain (empty when `lo > hi`).
    pub fn domain(&self) -> (f64, f64) {
        (self.domain_lo, self.domain_hi)
    }

    pub fn is_empty(&self) -> bool {
        self.domain_lo > self.domain_hi
    }

    /// Piecewise-linear evaluation; `+∞` off the grid or next to a `+∞` node.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if !(x >= self.xs[0] && x <= self.xs[n - 1]) {
            return f64::INFINITY;
        }
        match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => self.ys[i],
            Err(i) => {
                let (x0, x1) = (self.xs[i - 1], self.xs[i]);
                let (y0, y1) = (self.ys[i - 1], self.ys[i]);
                if !y0.is_finite() || !y1.is_finite() {
                    return f64::INFINITY;
                }
                let w = (x - x0) / (x1 - x0);
                y0 + w * (y1 - y0)
            }
        }
    }
}

/// f*(r) = max over grid points of r·x − f(x), at every slope in `slopes`.
pub fn legendre(f: &GridFunction, slopes: &[f64]) -> Result<GridFunction> {
    if f.is_empty() {
        return Err(Error::EmptyDomain("legendre of a function that is +inf everywhere".into()));
    }
    let finite: Vec<(f64, f64)> =
        f.xs.iter().zip(&f.ys).filter(|(_, y)| y.is_finite()).map(|(x, y)| (*x, *y)).collect();
    let ys = slopes
        .iter()
        .map(|&r| finite.iter().map(|&(x, y)| r * x - y).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    GridFunction::new(slopes.to_vec(), ys)
}

/// (f□g)(x) = inf_y { f(y) + g(x − y) }, with y ranging over the grid of `f`
/// and `g` interpolated.
pub fn inf_convolve(f: &GridFunction, g: &GridFunction, x_grid: &[f64]) -> Result<GridFunction> {
    if f.is_empty() || g.is_empty() {
        return Err(Error::EmptyDomain("infimal convolution with an empty domain".into()));
    }
    let ys = x_grid
        .iter()
        .map(|&x| {
            f.xs.iter()
                .zip(&f.ys)
                .filter(|(_, fy)| fy.is_finite())
                .map(|(&y, &fy)| fy + g.eval(x - y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    GridFunction::new(x_grid.to_vec(), ys)
}

/// A limiting log-moment generating function M(u) with effective domain
/// `(u_min, u_max)`.
pub struct LogMgf {
    eval: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub u_min: f64,
    pub u_max: f64,
}

impl LogMgf {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static, u_min: f64, u_max: f64) -> Self {
        LogMgf { eval: Box::new(eval), u_min, u_max }
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }
}

/// Which tail a one-sided rate function describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// sup over u ≥ 0
    Upper,
    /// sup over u ≤ 0
    Lower,
}

/// One-sided Cramér rate: sup_{u≥0} {a·u − M(u)} or sup_{u≤0} {a·u − M(u)}.
///
/// A coarse grid locates the maximizer of the concave objective and a
/// golden-section search refines it between the neighbouring grid points.
pub fn cramer_one_sided(m: &LogMgf, a: f64, side: Side) -> Result<f64> {
    let sign = match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    let reach = match side {
        Side::Upper => m.u_max,
        Side::Lower => -m.u_min,
    };
    let phi = |v: f64| {
        let u = sign * v;
        let val = a * u - m.eval(u);
        if val.is_nan() {
            f64::NEG_INFINITY
        } else {
            val
        }
    };
    let hi = if reach.is_finite() {
        if reach <= 0.0 {
            return Ok(phi(0.0).max(0.0));
        }
        reach * (1.0 - 1e-12)
    } else {
        let mut h = 1.0;
        let mut doublings = 0;
        while phi(2.0 * h) > phi(h) {
            h *= 2.0;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::Divergence(format!(
                    "one-sided rate at a={a} grows without bound as |u| increases"
                )));
            }
        }
        2.0 * h
    };
    let n = DEFAULT_GRID;
    let step = hi / (n - 1) as f64;
    let mut best_k = 0;
    let mut best = phi(0.0);
    for k in 1..n {
        let v = phi(k as f64 * step);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let lo_v = best_k.saturating_sub(1) as f64 * step;
    let hi_v = ((best_k + 1).min(n - 1)) as f64 * step;
    let (_, refined) = golden_max(phi, lo_v, hi_v, 1e-12 * hi.max(1.0));
    Ok(best.max(refined))
}
