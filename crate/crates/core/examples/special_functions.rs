// Log-gamma, digamma, trigamma and the inverse digamma.

use growthlab::specfun::{digamma, inv_digamma, log_gamma, trigamma};

pub fn run_example() -> growthlab::Result<()> {
    let euler = 0.577_215_664_901_532_9;
    println!("psi(1)      = {:.15}  (-gamma = {:.15})", digamma(1.0)?, -euler);
    println!("psi1(1)     = {:.15}  (pi^2/6 = {:.15})", trigamma(1.0)?, std::f64::consts::PI.powi(2) / 6.0);
    println!("lgamma(0.5) = {:.15}  (ln sqrt(pi))", log_gamma(0.5)?);
    for y in [-3.0, 0.0, 2.5] {
        let x = inv_digamma(y)?;
        println!("inv_digamma({y:>4}) = {x:.12}, psi of that = {:.12}", digamma(x)?);
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
