// Free energy and upper-tail rate functions of the log-gamma polymer.

use growthlab::loggamma::{dual_free_energy, free_energy, point_rate};

pub fn run_example() -> growthlab::Result<()> {
    let mu = 2.0;
    let p = free_energy(1.0, 1.0, mu)?;
    println!("p(1, 1) = {p:.10}");
    for dr in [-0.5, 0.0, 0.1, 0.5, 1.0] {
        println!("J(p + {dr:>4}) = {:.6}", point_rate(1.0, 1.0, p + dr, mu)?);
    }
    for xi in [0.1, 0.5, 1.0] {
        println!("J*({xi}) = {:.6}", dual_free_energy(1.0, 1.0, xi, mu)?);
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
