// Two-phase TASEP hydrodynamics: the height function from its variational
// formula, the entropy solution, and the checks it has to pass.

use growthlab::cli::standard_bumps;
use growthlab::env::SpeedFunction;
use growthlab::hydro::{
    closed_form_v, entropy_check, variational_v, weak_solution_residual, Profile, Quadrature, TwoPhaseProfile,
};
use growthlab::tasep::DensityProfile;

pub fn run_example() -> growthlab::Result<()> {
    let (c1, c2, t) = (1.0, 0.5, 1.0);
    let speed = SpeedFunction::two_phase(c1, c2)?;
    for rho in [0.1, 0.3, 0.7] {
        let prof = TwoPhaseProfile::new(rho, c1, c2)?;
        let rho0 = DensityProfile::new(vec![], vec![rho])?;
        let v = variational_v(0.25, t, &rho0, &speed)?;
        println!("rho = {rho}: v(0.25, 1) = {v:.8} (closed form {:.8})", closed_form_v(0.25, t, rho, c1, c2)?);
        let samples: Vec<String> = [-0.6, -0.2, -0.01, 0.01, 0.1, 0.3].iter().map(|&x| format!("{:.3}", prof.density(x, t))).collect();
        println!("  density at -0.6, -0.2, 0-, 0+, 0.1, 0.3: {}", samples.join(" "));
        let e = entropy_check(&prof, c1, c2, t);
        let weak = weak_solution_residual(&prof, c1, c2, &standard_bumps(t)?, &Quadrature::default())?;
        println!("  entropy {}, {} shock(s), flux residual {:.1e}, weak residual {weak:.1e}", if e.passed() { "ok" } else { "violated" }, e.shocks.len(), e.flux_residual);
    }
    Ok(())
}

fn main() -> growthlab::Result<()> {
    run_example()
}
