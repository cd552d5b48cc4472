// Stationary log-gamma polymer: the mean of log Z is exact at every size.

use growthlab::cli::burke_experiment;

pub fn run_example() -> growthlab::Result<()> {
    let b = burke_experiment(2.0, 0.8, 40, 40, 100, 5)?;
    println!("E log Z: {:.3} ± {:.3}, exact {:.3}", b.log_z.mean, b.log_z.stderr, b.expected);
    println!("top-row KS p = {:.3}, right-column KS p = {:.3}", b.ks_top_row.p_value, b.ks_right_column.p_value);
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
