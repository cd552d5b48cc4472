// Positive-temperature polymer: partition function, quenched paths and the
// approach to zero temperature.

use growthlab::env::{sample_loggamma_grid, RngSpec};
use growthlab::lattice::{log_partition, sample_quenched_path, zero_temperature_gap, Endpoint, Origin};

pub fn run_example() -> growthlab::Result<()> {
    let grid = sample_loggamma_grid(2.0, 1.0, 6, 6, false, RngSpec::new(9, 0))?;
    let z = log_partition(&grid, 1.0, Origin::Exclude)?;
    println!("log Z(6, 6) = {:.5}", z.get(6, 6).unwrap());

    let mut rng = RngSpec::new(9, 1).stream_rng();
    let path = sample_quenched_path(&z, &grid, Endpoint::Fixed(6, 6), &mut rng)?;
    println!("one quenched path: {:?}", path.sites());

    let betas = [1.0, 4.0, 16.0, 64.0];
    for row in zero_temperature_gap(&grid, (6, 6), &betas, Origin::Exclude)? {
        println!("beta {:>4}: log Z/beta - T = {:.5} <= {:.5}, Q(max path) = {:.5}", row.beta, row.gap, row.bound, row.q_max);
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
