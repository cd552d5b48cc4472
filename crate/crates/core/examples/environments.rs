// Speed functions and reproducible random environments.
//
// A grid is a pure function of its region, distribution and `RngSpec`, so
// the same spec always regenerates the same values, whatever order the
// sites are visited in.

use growthlab::env::{sample_exponential_grid, Region, RngSpec, SpeedFunction};

pub fn run_example() -> growthlab::Result<()> {
    let c = SpeedFunction::new(vec![-1.0, 1.0], vec![2.0, 1.0, 3.0])?;
    for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        println!("c({x:>4}) = {}", c.at(x));
    }

    let spec = RngSpec::new(42, 0);
    let grid = sample_exponential_grid(&c, 4, 0, Region::Rectangle { m: 8, n: 8 }, spec);
    let again = grid.metadata().regenerate()?;
    assert_eq!(grid.values(), again.values());
    println!("weight at (3, 5) = {:.6}, regenerated = {:.6}", grid.get(3, 5).unwrap(), again.get(3, 5).unwrap());

    let other = sample_exponential_grid(&c, 4, 0, Region::Rectangle { m: 8, n: 8 }, spec.substream(1));
    println!("substream weight at (3, 5) = {:.6}", other.get(3, 5).unwrap());
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
