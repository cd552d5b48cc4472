// Macroscopic passage constants: the homogeneous wedge shape, the two-phase
// corner shape and the numerical optimizer over piecewise-constant speeds.

use growthlab::env::SpeedFunction;
use growthlab::hydro::{g_level, gamma_q_path, gamma_wedge, default_budget, two_phase_shape};

pub fn run_example() -> growthlab::Result<()> {
    println!("gamma(1, 1) = {}", gamma_wedge(1.0, 1.0)?);

    let c = SpeedFunction::two_phase(2.0, 1.0)?;
    for (x, y) in [(0.01, 1.0), (0.1, 1.0), (2.0, 1.0)] {
        let (numeric, path) = gamma_q_path(x - y, y, 0.0, &c, default_budget(&c))?;
        println!(
            "Phi({x}, {y}) = {:.10}, optimizer {numeric:.10} with {} pieces",
            two_phase_shape(x, y, 2.0, 1.0)?,
            path.knots().len() - 1
        );
    }

    // three strips: the level curve bends where the speed changes
    let strips = SpeedFunction::new(vec![-0.5, 0.5], vec![1.0, 0.25, 1.0])?;
    for x in [-1.0, 0.0, 1.0] {
        println!("g(x = {x:>4}, t = 1) = {:.6}", g_level(x, 1.0, 0.0, &strips)?);
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
