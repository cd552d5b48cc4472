use growthlab::env::{sample_loggamma_grid, RngSpec};
use growthlab::lattice::{log_partition, Origin};
use growthlab::loggamma::*;
use growthlab::specfun::{digamma, log_gamma, trigamma};
use proptest::prelude::*;

const EULER: f64 = 0.577_215_664_901_532_9;

// 40-digit bisection references for the nested variational formulas.
const J11_AT_2G_PLUS_HALF: f64 = 0.288_875_921_811_579_6;
const J12_AT_2_5: f64 = 0.602_643_904_069_090_3;
const JSTAR11_AT_0_2: f64 = 0.232_497_361_989_165_4;
const JSTAR21_AT_0_5_MU3: f64 = -0.130_292_164_684_371_3;
const P14_MU2: f64 = 1.778_631_259_063_468_2;
const I2_AT_0: f64 = 0.121_486_290_535_849_6;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn cell_with_equal_inputs_doubles() {
    let y = 0.7;
    let out = StationaryCell::new(y, y, y).unwrap().outputs();
    assert!(close(out.u, 2.0 * y, 1e-15));
    assert!(close(out.v, 2.0 * y, 1e-15));
    assert!(close(out.x, y / 2.0, 1e-15));
}

#[test]
fn cell_x_is_harmonic_combination_of_inputs() {
    let c = StationaryCell::new(0.4, 1.3, 2.2).unwrap().outputs();
    assert!(close(c.x, 1.0 / (1.0 / 0.4 + 1.0 / 1.3), 1e-15));
    assert!(StationaryCell::new(0.0, 1.0, 1.0).is_err());
}

#[test]
fn ratio_identities_match_partition_field() {
    let (m, n) = (5usize, 5usize);
    let grid = sample_loggamma_grid(2.0, 0.8, m, n, true, RngSpec::new(11, 0)).unwrap();
    let w = |i: i64, j: i64| grid.get(i, j).unwrap().exp();
    let u_row: Vec<f64> = (1..=m as i64).map(|i| w(i, 0)).collect();
    let v_col: Vec<f64> = (1..=n as i64).map(|j| w(0, j)).collect();
    let mut y = Vec::new();
    for i in 1..=m as i64 {
        for j in 1..=n as i64 {
            y.push(w(i, j));
        }
    }
    let f = burke_propagate(&u_row, &v_col, &y).unwrap();
    let z = log_partition(&grid, 1.0, Origin::Exclude).unwrap();
    for i in 1..=m as i64 {
        for j in 0..=n as i64 {
            let want = (z.get(i, j).unwrap() - z.get(i - 1, j).unwrap()).exp();
            let got = f.u(i, j).unwrap();
            assert!(((got - want) / want).abs() < 1e-10, "U({i},{j})");
        }
    }
    for i in 0..=m as i64 {
        for j in 1..=n as i64 {
            let want = (z.get(i, j).unwrap() - z.get(i, j - 1).unwrap()).exp();
            let got = f.v(i, j).unwrap();
            assert!(((got - want) / want).abs() < 1e-10, "V({i},{j})");
        }
    }
    assert!(f.x(0, 0).is_some() && f.x(m as i64, 0).is_none());
}

#[test]
fn burke_rejects_bad_inputs() {
    assert!(burke_propagate(&[1.0], &[1.0], &[-1.0]).is_err());
    assert!(burke_propagate(&[1.0, 2.0], &[1.0], &[1.0]).is_err());
}

#[test]
fn stationary_mean_values() {
    let p = LogGammaParams::new(2.0, 0.8).unwrap();
    assert_eq!(stationary_mean_log_z(0, 0, &p), 0.0);
    assert!(close(stationary_mean_log_z(1, 0, &p), -digamma(0.8).unwrap(), 1e-15));
    let want = -200.0 * (digamma(0.8).unwrap() + digamma(1.2).unwrap());
    assert!(close(stationary_mean_log_z(200, 200, &p), want, 1e-10));
    assert!(LogGammaParams::new(2.0, 2.0).is_err());
}

#[test]
fn free_energy_on_the_diagonal() {
    assert!(close(free_energy(1.0, 1.0, 2.0).unwrap(), 2.0 * EULER, 1e-12));
    assert!(close(free_energy_theta(1.0, 1.0, 2.0).unwrap(), 1.0, 1e-12));
}

#[test]
fn free_energy_off_diagonal_matches_grid_minimization() {
    let (s, t, mu) = (1.0, 4.0, 2.0);
    let g = |th: f64| -(s * digamma(th).unwrap() + t * digamma(mu - th).unwrap());
    let mut best = f64::INFINITY;
    for k in 1..200_000 {
        best = best.min(g(mu * k as f64 / 200_000.0));
    }
    let p = free_energy(s, t, mu).unwrap();
    assert!(close(p, best, 1e-8));
    assert!(close(p, P14_MU2, 1e-12));
    let th = free_energy_theta(s, t, mu).unwrap();
    assert!(close(t * trigamma(mu - th).unwrap(), s * trigamma(th).unwrap(), 1e-10));
}

#[test]
fn free_energy_on_the_axes() {
    let mu = 2.0;
    assert!(close(free_energy(3.0, 0.0, mu).unwrap(), -3.0 * digamma(mu).unwrap(), 1e-14));
    assert!(close(free_energy(0.0, 3.0, mu).unwrap(), -3.0 * digamma(mu).unwrap(), 1e-14));
    assert!(free_energy(0.0, 0.0, mu).is_err());
}

#[test]
fn cramer_rate_values() {
    let mu = 2.0;
    assert!(cramer_rate(-digamma(mu).unwrap(), mu).unwrap().abs() < 1e-12);
    assert!(close(cramer_rate(0.0, mu).unwrap(), I2_AT_0, 1e-10));
    let m = growthlab::convex::LogMgf::new(|u| log_gamma(2.0 - u).unwrap_or(f64::INFINITY) - log_gamma(2.0).unwrap(), f64::NEG_INFINITY, 2.0);
    let side = if 0.0 > -digamma(mu).unwrap() { growthlab::convex::Side::Upper } else { growthlab::convex::Side::Lower };
    let grid_val = growthlab::convex::cramer_one_sided(&m, 0.0, side).unwrap();
    assert!(close(cramer_rate(0.0, mu).unwrap(), grid_val, 1e-6));
}

#[test]
fn cramer_rate_is_convex() {
    let h = 0.05;
    let v: Vec<f64> = (0..80).map(|k| cramer_rate(-2.0 + k as f64 * h, 1.5).unwrap()).collect();
    for w in v.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
    }
}

#[test]
fn boundary_rate_branches() {
    let mu = 2.0;
    assert!(boundary_rate(1.0, -digamma(mu).unwrap(), mu).unwrap().abs() < 1e-12);
    assert!(close(boundary_rate(0.0, 1.0, mu).unwrap(), 2.0, 1e-15));
    assert_eq!(boundary_rate(2.0, -5.0, mu).unwrap(), 0.0);
    assert!(close(boundary_rate(1e-4, 0.5, mu).unwrap(), 1.0, 5e-3));
    assert!(boundary_rate(-1.0, 0.0, mu).is_err());
}

#[test]
fn point_rate_zero_set() {
    let p = 2.0 * EULER;
    assert!(point_rate(1.0, 1.0, p, 2.0).unwrap().abs() < 1e-10);
    assert_eq!(point_rate(1.0, 1.0, p - 0.3, 2.0).unwrap(), 0.0);
    assert!(point_rate(1.0, 1.0, p + 0.01, 2.0).unwrap() > 0.0);
}

#[test]
fn point_rate_reference_values() {
    let j = point_rate(1.0, 1.0, 2.0 * EULER + 0.5, 2.0).unwrap();
    assert!(close(j, J11_AT_2G_PLUS_HALF, 1e-9), "{j}");
    assert!(close(point_rate(1.0, 2.0, 2.5, 2.0).unwrap(), J12_AT_2_5, 1e-9));
}

#[test]
fn point_rate_symmetry() {
    for k in 0..50 {
        let r = 1.5 + 0.05 * k as f64;
        let a = point_rate(1.0, 2.0, r, 2.0).unwrap();
        let b = point_rate(2.0, 1.0, r, 2.0).unwrap();
        assert!((a - b).abs() <= 1e-6, "r={r}");
    }
}

#[test]
fn point_rate_on_axes_delegates() {
    let r = 3.0;
    assert_eq!(point_rate(0.0, 2.0, r, 2.0).unwrap(), boundary_rate(2.0, r, 2.0).unwrap());
}

#[test]
fn point_rate_is_convex_and_nondecreasing() {
    let v: Vec<f64> = (0..40).map(|k| point_rate(1.0, 1.5, 1.0 + 0.06 * k as f64, 2.0).unwrap()).collect();
    for w in v.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
    for w in v.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
    }
}

#[test]
fn free_endpoint_rate_is_the_minimum_over_splits() {
    let (s, mu) = (2.0, 2.0);
    assert!(free_endpoint_rate(s, 2.0 * EULER, mu).unwrap().abs() < 1e-10);
    for r in [1.6, 2.0, 2.8] {
        let f = free_endpoint_rate(s, r, mu).unwrap();
        for k in 1..10 {
            let a = s * k as f64 / 10.0;
            assert!(f <= point_rate(a, s - a, r, mu).unwrap() + 1e-6);
        }
    }
    let v: Vec<f64> = (0..20).map(|k| free_endpoint_rate(s, 1.0 + 0.1 * k as f64, mu).unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn dual_rate_values() {
    assert_eq!(dual_rate(1.0, 1.0, 0.0, 2.0).unwrap(), 0.0);
    assert!(close(dual_rate(1.0, 1.0, 0.2, 2.0).unwrap(), JSTAR11_AT_0_2, 1e-7));
    assert!(close(dual_rate(2.0, 1.0, 0.5, 3.0).unwrap(), JSTAR21_AT_0_5_MU3, 1e-7));
    assert!(matches!(dual_rate(1.0, 1.0, 2.0, 2.0), Err(growthlab::Error::Divergence(_))));
}

#[test]
fn dual_rate_slope_at_zero_is_free_energy() {
    let xi = 1e-3;
    let slope = dual_rate(1.0, 1.0, xi, 2.0).unwrap() / xi;
    assert!(close(slope, 2.0 * EULER, 1e-3));
}

#[test]
fn dual_rate_agrees_with_direct_variational_form() {
    for (s, t, xi) in [(1.0, 1.0, 0.5), (0.5, 2.0, 1.2), (3.0, 1.0, 0.1)] {
        let a = dual_rate(s, t, xi, 2.0).unwrap();
        let b = dual_free_energy(s, t, xi, 2.0).unwrap();
        assert!(close(a, b, 1e-7), "({s},{t},{xi}): {a} vs {b}");
    }
}

#[test]
fn legendre_roundtrip_recovers_point_rate() {
    let xis: Vec<f64> = (0..400).map(|k| 1.9 * k as f64 / 399.0).collect();
    let jstar: Vec<f64> = xis.iter().map(|&x| dual_free_energy(1.0, 1.0, x, 2.0).unwrap()).collect();
    for r in [1.3, 1.6, 2.0, 2.5] {
        let back = xis.iter().zip(&jstar).map(|(x, f)| r * x - f).fold(f64::NEG_INFINITY, f64::max);
        assert!(close(back, point_rate(1.0, 1.0, r, 2.0).unwrap(), 5e-3), "r={r}");
    }
}

#[test]
fn kappa_star_branches() {
    assert_eq!(kappa_star(-1.0, 1.0, 1.0, 0.0, 2.0, 0.8), 0.0);
    let want = log_gamma(1.5).unwrap() - log_gamma(1.2).unwrap();
    assert!(close(kappa_star(0.0, 1.0, 1.0, 0.3, 2.0, 0.8), want, 1e-14));
    assert_eq!(kappa_star(0.5, 1.0, 1.0, 0.9, 2.0, 0.8), f64::INFINITY);
    assert_eq!(kappa_star(2.0, 1.0, 1.0, 0.1, 2.0, 0.8), f64::INFINITY);
}

#[test]
fn exit_decomposition_holds() {
    assert_eq!(exit_decomposition_residual(1.0, 1.0, 0.0, 1.3, 2.0).unwrap(), 0.0);
    assert!(exit_decomposition_residual(1.0, 1.0, 0.2, 1.3, 2.0).unwrap() <= 5e-3);
    assert!(exit_decomposition_residual(2.0, 1.0, 0.5, 2.0, 3.0).unwrap() <= 5e-3);
    assert!(exit_decomposition_residual(1.0, 1.0, 0.5, 0.4, 2.0).is_err());
}

#[test]
fn three_halves_exponent() {
    let r0 = -2.0 * digamma(1.0).unwrap();
    assert!(point_rate(1.0, 1.0, r0, 2.0).unwrap().abs() < 1e-8);
    assert_eq!(point_rate(1.0, 1.0, r0 - 0.1, 2.0).unwrap(), 0.0);
    let e = cube_root_expansion_exponent(2.0).unwrap();
    assert!((1.35..=1.65).contains(&e), "{e}");
}

#[test]
fn rate_query_dispatch() {
    let q = RateQuery { s: 1.0, t: 1.0, r: 2.0, mu: 2.0, xi: Some(0.2) };
    assert_eq!(q.point_rate().unwrap(), point_rate(1.0, 1.0, 2.0, 2.0).unwrap());
    assert_eq!(q.dual_rate().unwrap(), dual_rate(1.0, 1.0, 0.2, 2.0).unwrap());
    let bad = RateQuery { s: 0.0, t: 0.0, r: 1.0, mu: 2.0, xi: None };
    assert!(bad.point_rate().is_err() && bad.dual_rate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn burke_identities_hold_for_any_positive_inputs(
        u in proptest::collection::vec(0.05f64..20.0, 3),
        v in proptest::collection::vec(0.05f64..20.0, 4),
        y in proptest::collection::vec(0.05f64..20.0, 12),
    ) {
        let f = burke_propagate(&u, &v, &y).unwrap();
        // Z recomputed from scratch in linear space
        let (m, n) = (3usize, 4usize);
        let mut z = vec![vec![0.0; n + 1]; m + 1];
        z[0][0] = 1.0;
        for i in 1..=m { z[i][0] = z[i - 1][0] * u[i - 1]; }
        for j in 1..=n { z[0][j] = z[0][j - 1] * v[j - 1]; }
        for i in 1..=m {
            for j in 1..=n {
                z[i][j] = y[(i - 1) * n + (j - 1)] * (z[i - 1][j] + z[i][j - 1]);
            }
        }
        for i in 1..=m {
            for j in 1..=n {
                let uu = z[i][j] / z[i - 1][j];
                let vv = z[i][j] / z[i][j - 1];
                prop_assert!(((f.u(i as i64, j as i64).unwrap() - uu) / uu).abs() < 1e-10);
                prop_assert!(((f.v(i as i64, j as i64).unwrap() - vv) / vv).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn free_energy_is_one_homogeneous(s in 0.05f64..5.0, t in 0.05f64..5.0, mu in 0.3f64..6.0, c in 0.1f64..10.0) {
        let a = free_energy(c * s, c * t, mu).unwrap();
        let b = c * free_energy(s, t, mu).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
    }

    #[test]
    fn free_energy_is_symmetric(s in 0.05f64..5.0, t in 0.05f64..5.0, mu in 0.3f64..6.0) {
        let a = free_energy(s, t, mu).unwrap();
        let b = free_energy(t, s, mu).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn point_rate_is_nonnegative(s in 0.2f64..3.0, t in 0.2f64..3.0, r in -2.0f64..6.0) {
        prop_assert!(point_rate(s, t, r, 2.0).unwrap() >= 0.0);
    }
}
