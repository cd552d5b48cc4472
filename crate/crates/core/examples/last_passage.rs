// Corner last-passage times, a maximal path, and the two-phase limit shape.

use growthlab::cli::{corner_shape_estimate, corner_shape_limit};
use growthlab::env::{sample_exponential_grid, Region, RngSpec, SpeedFunction};
use growthlab::lattice::{last_passage_with, max_path_backtrace, Origin};

pub fn run_example() -> growthlab::Result<()> {
    let unit = SpeedFunction::constant(1.0)?;
    let grid = sample_exponential_grid(&unit, 1, 0, Region::Rectangle { m: 6, n: 4 }, RngSpec::new(3, 0));
    let field = last_passage_with(&grid, Origin::Include)?;
    let best = max_path_backtrace(&field, &grid, (6, 4))?;
    println!("G(6, 4) = {:.4} along {:?}", field.get(6, 4).unwrap(), best.path.sites());

    for (x, y) in [(0.1, 1.0), (2.0, 1.0)] {
        let est = corner_shape_estimate(2.0, 1.0, x, y, 100, 20, 11)?;
        let limit = corner_shape_limit(2.0, 1.0, x, y)?;
        println!("n=100: G/n at ({x}, {y}) = {:.3} ± {:.3}, limit {limit:.4}", est.mean, est.stderr);
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
