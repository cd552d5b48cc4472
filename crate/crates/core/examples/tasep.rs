// Event-driven TASEP from step initial data: the rarefaction fan.

use growthlab::env::{RngSpec, SpeedFunction};
use growthlab::tasep::{occupation_measure, simulate, InitialData, TasepRun, Window};

pub fn run_example() -> growthlab::Result<()> {
    let n = 300;
    let run = TasepRun {
        speed: SpeedFunction::constant(1.0)?,
        n,
        initial: InitialData::Step,
        horizon: n as f64,
        window: Window::new(-2 * n as i64, 2 * n as i64)?,
    };
    let traj = simulate(&run, RngSpec::new(1, 0))?;
    println!("{} jumps recorded", traj.jump_count());
    for k in 0..8 {
        let a = -1.0 + 0.25 * k as f64;
        let rho = occupation_measure(&traj, a, a + 0.25, 1.0, n)? / 0.25;
        let fan = (0.5 * (1.0 - (a + 0.125))).clamp(0.0, 1.0);
        println!("[{a:>5.2}, {:>5.2}): {rho:.3}  fan {fan:.3}", a + 0.25);
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
