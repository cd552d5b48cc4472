use growthlab::env::{
    sample_exponential_grid, sample_loggamma_grid, Distribution, speed_at, Region, RngSpec, SpeedFunction,
    WeightGrid,
};
use growthlab::specfun::{digamma, trigamma};
use growthlab::Error;
use proptest::prelude::*;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[test]
fn speed_function_examples() {
    let c = SpeedFunction::two_phase(2.0, 1.0).unwrap();
    assert_eq!(speed_at(&c, -0.5), 2.0);
    assert_eq!(speed_at(&c, 0.0), 1.0);
    assert_eq!(speed_at(&c, 0.5), 1.0);
    let flipped = SpeedFunction::two_phase(1.0, 2.0).unwrap();
    assert_eq!(speed_at(&flipped, 0.0), 1.0);
    let k = SpeedFunction::constant(3.0).unwrap();
    for x in [-1e9, -1.0, 0.0, 7.5] {
        assert_eq!(speed_at(&k, x), 3.0);
    }
}

#[test]
fn speed_function_validation() {
    assert!(SpeedFunction::new(vec![0.0], vec![1.0]).is_err());
    assert!(SpeedFunction::new(vec![1.0, 0.0], vec![1.0, 1.0, 1.0]).is_err());
    assert!(SpeedFunction::new(vec![0.0], vec![1.0, -1.0]).is_err());
    assert!(SpeedFunction::constant(0.0).is_err());
}

#[test]
fn lower_semicontinuity_at_every_breakpoint() {
    let c = SpeedFunction::new(vec![-1.0, 0.5, 2.0], vec![3.0, 1.5, 4.0, 0.5]).unwrap();
    assert_eq!(speed_at(&c, -1.0), 1.5);
    assert_eq!(speed_at(&c, 0.5), 1.5);
    assert_eq!(speed_at(&c, 2.0), 0.5);
    assert_eq!(c.max_rate(), 4.0);
    assert_eq!(c.min_rate(), 0.5);
}

fn one_site_draws(rate: f64, count: u64) -> Vec<f64> {
    let c = SpeedFunction::constant(rate).unwrap();
    (0..count)
        .map(|s| {
            let g = sample_exponential_grid(&c, 1, 0, Region::Rectangle { m: 0, n: 0 }, RngSpec::new(99, s));
            g.get(0, 0).unwrap()
        })
        .collect()
}

#[test]
fn exponential_means() {
    for rate in [1.0, 2.0] {
        let xs = one_site_draws(rate, 100_000);
        let (m, v) = mean_var(&xs);
        let se = (v / xs.len() as f64).sqrt();
        assert!((m - 1.0 / rate).abs() <= 3.0 * se, "rate {rate}: mean {m} se {se}");
    }
}

#[test]
fn site_values_are_pure_functions_of_seed_and_site() {
    let c = SpeedFunction::two_phase(2.0, 1.0).unwrap();
    let rng = RngSpec::new(7, 3);
    let small = sample_exponential_grid(&c, 10, 0, Region::Rectangle { m: 3, n: 3 }, rng);
    let big = sample_exponential_grid(&c, 10, 0, Region::Rectangle { m: 9, n: 5 }, rng);
    for i in 0..=3 {
        for j in 0..=3 {
            assert_eq!(small.get(i, j).unwrap().to_bits(), big.get(i, j).unwrap().to_bits());
        }
    }
    let wedge = sample_exponential_grid(&c, 10, 0, Region::wedge(4, 3), rng);
    assert_eq!(wedge.get(2, 2).unwrap().to_bits(), big.get(2, 2).unwrap().to_bits());
    let other = sample_exponential_grid(&c, 10, 0, Region::Rectangle { m: 3, n: 3 }, RngSpec::new(7, 4));
    assert_ne!(other.get(1, 1).unwrap(), small.get(1, 1).unwrap());
}

#[test]
fn rates_follow_speed_with_shift() {
    // value / (Exp(1) with the same key) equals 1/c((i−ℓ)/n)
    let one = SpeedFunction::constant(1.0).unwrap();
    let c = SpeedFunction::two_phase(2.0, 1.0).unwrap();
    let rng = RngSpec::new(11, 0);
    let base = sample_exponential_grid(&one, 4, 0, Region::wedge(3, 6), rng);
    let shifted = sample_exponential_grid(&c, 4, 2, Region::wedge(3, 6), rng);
    for (i, j) in shifted.region().sites() {
        let ratio = base.get(i, j).unwrap() / shifted.get(i, j).unwrap();
        let want = speed_at(&c, (i - 2) as f64 / 4.0);
        assert!((ratio - want).abs() < 1e-12);
    }
}

#[test]
fn wedge_region_shape() {
    let r = Region::wedge(3, 2);
    assert!(r.contains(0, 1));
    assert!(r.contains(-2, 3));
    assert!(!r.contains(-2, 2));
    assert!(!r.contains(0, 0));
    assert!(r.contains(4, 1) && !r.contains(5, 1));
    assert!(r.contains(2, 3) && !r.contains(3, 3));
    assert!(Region::Wedge { rows: 2, right: vec![0, 3] }.validate().is_err());
}

#[test]
fn log_inverse_gamma_moments() {
    let g = sample_loggamma_grid(2.0, 1.0, 316, 316, false, RngSpec::new(5, 0)).unwrap();
    let xs: Vec<f64> = g.region().sites().filter(|&s| s != (0, 0)).map(|(i, j)| g.get(i, j).unwrap()).collect();
    let (m, v) = mean_var(&xs);
    let n = xs.len() as f64;
    assert!((m + digamma(2.0).unwrap()).abs() <= 3.0 * (v / n).sqrt());
    // Var(s²) ≈ (μ4 − σ⁴)/n with μ4 = Ψ3(2) + 3Ψ1(2)² and Ψ3(2) = π⁴/15 − 6
    let psi1 = trigamma(2.0).unwrap();
    let psi3 = std::f64::consts::PI.powi(4) / 15.0 - 6.0;
    let sd_var = ((psi3 + 2.0 * psi1 * psi1) / n).sqrt();
    assert!((v - psi1).abs() <= 3.0 * sd_var, "var {v} vs {psi1} (sd {sd_var})");
    assert_eq!(g.get(0, 0).unwrap(), 0.0);
}

#[test]
fn boundary_weights_symmetric_at_half() {
    let dist = Distribution::LogGamma { mu: 2.0, theta: 1.0, with_boundary: true };
    let rng = RngSpec::new(8, 1);
    let u: Vec<f64> = (1..=40_000).map(|i| dist.sample_site(&rng, i, 0)).collect();
    let v: Vec<f64> = (1..=40_000).map(|j| dist.sample_site(&rng, 0, j)).collect();
    let (mu, vu) = mean_var(&u);
    let (mv, vv) = mean_var(&v);
    let se = ((vu + vv) / 40_000.0).sqrt();
    assert!((mu - mv).abs() <= 3.0 * se);
    assert!((mu + digamma(1.0).unwrap()).abs() <= 3.0 * (vu / 40_000.0).sqrt());
}

#[test]
fn loggamma_parameter_error() {
    assert!(matches!(sample_loggamma_grid(2.0, 2.0, 2, 2, true, RngSpec::new(0, 0)), Err(Error::Parameter(_))));
    assert!(matches!(sample_loggamma_grid(2.0, 0.0, 2, 2, true, RngSpec::new(0, 0)), Err(Error::Parameter(_))));
}

#[test]
fn sidecar_roundtrip_and_regeneration() {
    let dir = std::env::temp_dir().join(format!("growthlab-env-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let c = SpeedFunction::two_phase(2.0, 1.0).unwrap();
    let grids = [
        sample_exponential_grid(&c, 5, 1, Region::wedge(4, 2), RngSpec::new(1, 2)),
        sample_loggamma_grid(2.0, 0.8, 6, 4, true, RngSpec::new(3, 4)).unwrap(),
    ];
    for (k, g) in grids.iter().enumerate() {
        let stem = dir.join(format!("grid{k}"));
        g.write_sidecar(&stem).unwrap();
        let back = WeightGrid::read_sidecar(&stem).unwrap();
        assert_eq!(&back, g);
        let regen = back.metadata().regenerate().unwrap();
        assert_eq!(&regen, g);
    }
    std::fs::remove_dir_all(&dir).ok();
}

proptest! {
    #[test]
    fn speed_at_matches_piece(x in -5.0f64..5.0) {
        let c = SpeedFunction::new(vec![-1.0, 0.5, 2.0], vec![3.0, 1.5, 4.0, 0.5]).unwrap();
        let want = if x < -1.0 { 3.0 } else if x <= 0.5 { 1.5 } else if x < 2.0 { 4.0 } else { 0.5 };
        prop_assert_eq!(speed_at(&c, x), want);
    }

    #[test]
    fn exponential_weights_nonnegative(seed in any::<u64>(), stream in any::<u64>()) {
        let c = SpeedFunction::constant(1.3).unwrap();
        let g = sample_exponential_grid(&c, 3, 0, Region::Rectangle { m: 4, n: 4 }, RngSpec::new(seed, stream));
        prop_assert!(g.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }
}
