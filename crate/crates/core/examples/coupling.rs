// TASEP passage times have the law of corner last-passage times.

use growthlab::env::RngSpec;
use growthlab::tasep::lpp_coupling_check;

pub fn run_example() -> growthlab::Result<()> {
    let r = lpp_coupling_check(4, 3, 1000, RngSpec::new(2, 0))?;
    println!("G(4,3): {:.3} ± {:.3}", r.lpp.mean, r.lpp.stderr);
    println!("TASEP:  {:.3} ± {:.3}", r.tasep.mean, r.tasep.stderr);
    println!("two-sample KS p = {:.3}", r.ks.p_value);
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
