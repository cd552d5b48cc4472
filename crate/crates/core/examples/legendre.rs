// Grid Legendre transform and a one-sided Cramér rate.

use growthlab::convex::{cramer_one_sided, legendre, GridFunction, LogMgf, Side};

pub fn run_example() -> growthlab::Result<()> {
    // f(x) = x²/2 is its own conjugate
    let xs: Vec<f64> = (0..=2000).map(|k| -5.0 + 10.0 * k as f64 / 2000.0).collect();
    let f = GridFunction::from_fn(xs, |x| 0.5 * x * x)?;
    let slopes = [-2.0, -0.5, 0.0, 1.0, 3.0];
    let conj = legendre(&f, &slopes)?;
    for (r, v) in slopes.iter().zip(conj.ys()) {
        println!("f*({r:>4}) = {v:.6}   exact {:.6}", 0.5 * r * r);
    }

    // upper tail of an Exp(1) sample mean: a - 1 - ln a for a > 1
    let m = LogMgf::new(|u| -(1.0 - u).ln(), -50.0, 1.0 - 1e-9);
    for a in [1.5, 2.0, 4.0] {
        println!("I({a}) = {:.6}   exact {:.6}", cramer_one_sided(&m, a, Side::Upper)?, a - 1.0 - a.ln());
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
