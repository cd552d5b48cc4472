// Deterministic replicas: results depend on the seed, not on the worker count.

use growthlab::mc::{ks_test, run_replicas_with};
use rand::Rng;

pub fn run_example() -> growthlab::Result<()> {
    let draw = |spec: &growthlab::env::RngSpec| Ok(spec.stream_rng().random::<f64>());
    let one = run_replicas_with(draw, 2000, 17, 1)?;
    let four = run_replicas_with(draw, 2000, 17, 4)?;
    assert_eq!(one, four);
    println!("mean of 2000 uniforms: {:.4} ± {:.4}", one.mean, one.stderr);

    let xs = growthlab::mc::collect_replicas_with(draw, 2000, 17, 2)?;
    let ks = ks_test(&xs, |x| x.clamp(0.0, 1.0))?;
    println!("KS against U(0,1): D = {:.4}, p = {:.3}", ks.statistic, ks.p_value);
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
