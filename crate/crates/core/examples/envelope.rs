// The height function as an envelope of ξ-processes driven by the same clocks.

use growthlab::env::RngSpec;
use growthlab::tasep::{envelope_experiment, EnvelopeSetup};

pub fn run_example() -> growthlab::Result<()> {
    let setup = EnvelopeSetup { horizon: 10.0, samples: 50, ..EnvelopeSetup::default() };
    let shared = envelope_experiment(&setup, RngSpec::new(8, 0))?;
    println!("shared clocks: {} comparisons, {} violations", shared.checked, shared.violations.len());
    let shifted = envelope_experiment(&EnvelopeSetup { clock_offset: 1, ..setup }, RngSpec::new(8, 0))?;
    println!("shifted clocks: {} violations", shifted.violations.len());
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
