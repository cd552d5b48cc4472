// Driving a subcommand from an in-memory config, as the binary does.

use growthlab::cli::{execute, Command, RunConfig};

pub fn run_example() -> growthlab::Result<()> {
    let text = r#"
        seed = 3

        [params]
        rho = 0.7
        c1 = 1.0
        c2 = 0.5
    "#;
    let cfg = RunConfig::from_toml(text)?.resolve(Command::Entropy, None, None)?;
    println!("resolved config:\n{}", cfg.to_toml()?);
    let report = execute(Command::Entropy, &cfg)?;
    for line in &report.summary {
        println!("{line}");
    }
    println!("files: {:?}", report.files.iter().map(|f| &f.0).collect::<Vec<_>>());
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
