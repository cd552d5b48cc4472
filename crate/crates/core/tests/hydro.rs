use growthlab::convex::{legendre, GridFunction};
use growthlab::env::SpeedFunction;
use growthlab::hydro::*;
use growthlab::tasep::DensityProfile;
use proptest::prelude::*;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn flat(rho: f64) -> DensityProfile {
    DensityProfile::new(vec![], vec![rho]).unwrap()
}

#[test]
fn wedge_shape_values() {
    assert!(close(gamma_wedge(1.0, 1.0).unwrap(), (SQRT2 + 1.0).powi(2), 1e-14));
    assert!(close(gamma_wedge(0.0, 2.5).unwrap(), 10.0, 1e-14));
    assert!(close(gamma_wedge(3.0, 0.0).unwrap(), 3.0, 1e-14));
    assert!(close(gamma_wedge(-1.0, 1.0).unwrap(), 1.0, 1e-14));
    assert!(gamma_wedge(-2.0, 1.0).is_err());
    assert!(gamma_wedge(1.0, -0.1).is_err());
}

#[test]
fn legendre_shape_values() {
    assert_eq!(g_legendre(0.0), 0.25);
    assert_eq!(g_legendre(1.0), 0.0);
    assert_eq!(g_legendre(-1.0), 1.0);
    assert_eq!(g_legendre(-2.0), 2.0);
    assert_eq!(g_legendre(3.0), 0.0);
}

proptest! {
    #[test]
    fn wedge_shape_is_homogeneous_and_concave(x in -1.0f64..3.0, y in 1.0f64..3.0, u in -1.0f64..3.0, v in 1.0f64..3.0) {
        let a = gamma_wedge(x, y).unwrap();
        for lam in [2.0, 0.5] {
            prop_assert!((gamma_wedge(lam * x, lam * y).unwrap() - lam * a).abs() <= 1e-12 * (1.0 + a));
        }
        let b = gamma_wedge(u, v).unwrap();
        let mid = gamma_wedge(0.5 * (x + u), 0.5 * (y + v)).unwrap();
        prop_assert!(mid >= 0.5 * (a + b) - 1e-12);
    }

    #[test]
    fn g_is_the_flux_sup(y in -3.0f64..3.0) {
        let best = (0..=20_000).map(|k| {
            let r = k as f64 / 20_000.0;
            r * (1.0 - r) - y * r
        }).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((g_legendre(y) - best).abs() <= 1e-8);
    }
}

#[test]
fn two_phase_params_invariants() {
    let p = TwoPhaseParams::new(2.0, 1.0).unwrap();
    assert!(close(p.b, 3.0 - 2.0 * SQRT2, 1e-15));
    assert!(p.b > 0.0 && p.b <= 1.0);
    assert!(close(p.d(p.rho_star), 0.0, 1e-12));
    assert!(p.rho_star > 0.0 && p.rho_star <= 0.5);
    assert!(close(p.big_b, 2.0f64.sqrt(), 1e-15));
    let eq = TwoPhaseParams::new(1.5, 1.5).unwrap();
    assert_eq!(eq.b, 1.0);
    assert_eq!(eq.rho_star, 0.5);
    assert!(TwoPhaseParams::new(1.0, 2.0).is_err());
    assert!(TwoPhaseParams::new(1.0, 0.0).is_err());
}

#[test]
fn two_phase_shape_reference_points() {
    let mid = two_phase_shape(0.1, 1.0, 2.0, 1.0).unwrap();
    assert!(close(mid, (2.0 + SQRT2) * 0.1 + (2.0 - SQRT2), 1e-12));
    assert!(close(mid, 0.927_207_793_864_214_5, 1e-12));
    assert!(close(two_phase_shape(2.0, 1.0, 2.0, 1.0).unwrap(), (SQRT2 + 1.0).powi(2), 1e-12));
    // first branch x ≤ b²y with b² ≈ 0.0294
    let low = two_phase_shape(0.01, 1.0, 2.0, 1.0).unwrap();
    assert!(close(low, (0.1f64 + 1.0).powi(2) / 2.0, 1e-12));
    for c in [0.5, 1.0, 3.0] {
        assert!(close(two_phase_shape(1.0, 1.0, c, c).unwrap(), 4.0 / c, 1e-12));
        assert!(close(two_phase_shape(0.3, 2.0, c, c).unwrap(), (0.3f64.sqrt() + 2.0f64.sqrt()).powi(2) / c, 1e-12));
    }
    assert!(two_phase_shape(1.0, 1.0, 1.0, 2.0).is_err());
}

#[test]
fn two_phase_shape_is_continuous_across_branches() {
    for (c1, c2) in [(2.0, 1.0), (5.0, 1.0), (1.3, 1.2)] {
        let p = TwoPhaseParams::new(c1, c2).unwrap();
        let y = 1.7;
        for x0 in [p.b * p.b * y, y] {
            let e = 1e-13;
            let a = two_phase_shape(x0 - e, y, c1, c2).unwrap();
            let b = two_phase_shape(x0 + e, y, c1, c2).unwrap();
            assert!(close(a, b, 1e-10), "c=({c1},{c2}) x0={x0}: {a} vs {b}");
        }
    }
}

#[test]
fn gamma_q_constant_speed() {
    for c in [0.5, 1.0, 2.0] {
        let sf = SpeedFunction::constant(c).unwrap();
        for (x, y, q) in [(1.0, 1.0, 0.0), (-0.5, 2.0, 0.3), (4.0, 0.2, -1.0)] {
            let v = gamma_q(x, y, q, &sf).unwrap();
            assert!(close(v, gamma_wedge(x, y).unwrap() / c, 1e-8));
        }
    }
}

#[test]
fn gamma_q_vertical_run_on_the_interface() {
    let sf = SpeedFunction::two_phase(2.0, 1.0).unwrap();
    for y in [0.5, 1.0, 3.0] {
        assert!(close(gamma_q(0.0, y, 0.0, &sf).unwrap(), 4.0 * y / 1.0, 1e-8));
    }
    let rev = SpeedFunction::two_phase(1.0, 2.0).unwrap();
    assert!(close(gamma_q(0.0, 1.0, 0.0, &rev).unwrap(), 4.0, 1e-8));
}

#[test]
fn gamma_q_reproduces_the_corner_shape() {
    // corner point (x, y) sits at (x - y, y) in the wedge
    for (c1, c2) in [(2.0, 1.0), (3.0, 0.5)] {
        let sf = SpeedFunction::two_phase(c1, c2).unwrap();
        for (x, y) in [(0.01, 1.0), (0.1, 1.0), (0.5, 1.0), (2.0, 1.0), (1.0, 0.3), (0.2, 2.0)] {
            let numeric = gamma_q(x - y, y, 0.0, &sf).unwrap();
            let closed = two_phase_shape(x, y, c1, c2).unwrap();
            assert!(close(numeric, closed, 1e-8), "({c1},{c2}) at ({x},{y}): {numeric} vs {closed}");
        }
    }
}

#[test]
fn gamma_q_path_weight_matches_value() {
    let sf = SpeedFunction::new(vec![-0.5, 0.4], vec![1.0, 0.6, 1.5]).unwrap();
    for (x, y, q) in [(1.0, 1.0, 0.0), (-0.8, 1.2, 0.1), (0.3, 0.5, -0.2)] {
        let (v, path) = gamma_q_path(x, y, q, &sf, default_budget(&sf)).unwrap();
        assert!(close(path.wedge_weight(&sf, q).unwrap(), v, 1e-9));
        let end = *path.wedge_points().unwrap().last().unwrap();
        assert!(close(end.0, x, 1e-12) && close(end.1, y, 1e-12));
    }
}

#[test]
fn gamma_q_bounds_and_homogeneity() {
    let sf = SpeedFunction::new(vec![-0.5, 0.4], vec![1.0, 0.6, 1.5]).unwrap();
    let scaled = SpeedFunction::new(vec![-1.0, 0.8], vec![1.0, 0.6, 1.5]).unwrap();
    let half = SpeedFunction::new(vec![-0.25, 0.2], vec![1.0, 0.6, 1.5]).unwrap();
    for (x, y, q) in [(1.0, 1.0, 0.0), (-0.8, 1.2, 0.1), (2.0, 0.5, -0.2)] {
        let v = gamma_q(x, y, q, &sf).unwrap();
        let g = gamma_wedge(x, y).unwrap();
        assert!(v >= g / 1.5 - 1e-9 && v <= g / 0.6 + 1e-9);
        let v2 = gamma_q(2.0 * x, 2.0 * y, 2.0 * q, &scaled).unwrap();
        assert!(close(v2, 2.0 * v, 1e-8));
        let vh = gamma_q(0.5 * x, 0.5 * y, 0.5 * q, &half).unwrap();
        assert!(close(vh, 0.5 * v, 1e-8));
    }
}

#[test]
fn gamma_q_rejects_points_outside_the_wedge() {
    let sf = SpeedFunction::constant(1.0).unwrap();
    assert!(gamma_q(-2.0, 1.0, 0.0, &sf).is_err());
    assert!(gamma_q(1.0, -1.0, 0.0, &sf).is_err());
}

#[test]
fn macro_path_validation() {
    assert!(MacroPath::wedge(vec![0.0, 1.0], vec![(0.0, 0.0), (1.0, 1.0)]).is_ok());
    assert!(MacroPath::wedge(vec![0.0, 1.0], vec![(0.0, 0.0), (-2.0, 1.0)]).is_err());
    assert!(MacroPath::wedge(vec![0.0, 0.5], vec![(0.0, 0.0), (1.0, 1.0)]).is_err());
    assert!(MacroPath::wedge(vec![0.0, 0.5, 0.5, 1.0], vec![(0.0, 0.0); 4]).is_err());
    assert!(MacroPath::trajectory(vec![0.0, 2.0], vec![0.3, 1.0]).is_ok());
    assert!(MacroPath::trajectory(vec![0.0, 0.0], vec![0.3, 1.0]).is_err());
    let p = MacroPath::trajectory(vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
    assert!(p.wedge_weight(&SpeedFunction::constant(1.0).unwrap(), 0.0).is_err());
}

#[test]
fn trajectory_action_on_a_straight_line() {
    let c = SpeedFunction::constant(2.0).unwrap();
    let p = MacroPath::trajectory(vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
    assert!(close(p.action(&c).unwrap(), 2.0 * g_legendre(0.25), 1e-14));
    // a crossing segment is charged piecewise
    let two = SpeedFunction::two_phase(1.0, 0.5).unwrap();
    let cross = MacroPath::trajectory(vec![0.0, 2.0], vec![-0.5, 0.5]).unwrap();
    let expect = 1.0 * 1.0 * g_legendre(0.5) + 0.5 * 1.0 * g_legendre(1.0);
    assert!(close(cross.action(&two).unwrap(), expect, 1e-14));
}

#[test]
fn level_curve_inversion() {
    let unit = SpeedFunction::constant(1.0).unwrap();
    for t in [0.5, 1.0, 4.0] {
        assert!(close(g_level(0.0, t, 0.0, &unit).unwrap(), t / 4.0, 1e-10));
    }
    let two = SpeedFunction::two_phase(2.0, 1.0).unwrap();
    for t in [0.4, 2.0] {
        assert!(close(g_level(0.0, t, 0.0, &two).unwrap(), t / 4.0, 1e-10));
    }
    let sf = SpeedFunction::new(vec![-0.5, 0.4], vec![1.0, 0.6, 1.5]).unwrap();
    for (x, t, q) in [(0.3, 2.0, 0.0), (-0.7, 1.5, 0.2), (1.0, 3.0, -0.3)] {
        let y = g_level(x, t, q, &sf).unwrap();
        assert!(close(gamma_q(x, y, q, &sf).unwrap(), t, 1e-8));
    }
    // below the horizontal passage time the level sits on the wedge boundary
    assert_eq!(g_level(2.0, 1.0, 0.0, &unit).unwrap(), 0.0);
    let ys: Vec<f64> = (1..=10).map(|k| g_level(0.2, k as f64 * 0.5, 0.1, &sf).unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[1] > w[0]));
    assert!(g_level(0.0, 0.0, 0.0, &unit).is_err());
}

#[test]
fn homogeneous_variational_solution() {
    for (c, rho) in [(1.0, 0.3), (0.5, 0.8), (2.0, 0.5)] {
        let sf = SpeedFunction::constant(c).unwrap();
        for (x, t) in [(0.2, 1.0), (-0.7, 0.5), (1.3, 2.0)] {
            let v = variational_v(x, t, &flat(rho), &sf).unwrap();
            assert!(close(v, rho * x - c * t * rho * (1.0 - rho), 1e-9), "c={c} rho={rho} ({x},{t}): {v}");
        }
    }
}

#[test]
fn variational_v_step_initial_data_gives_the_fan() {
    let sf = SpeedFunction::constant(1.0).unwrap();
    let step = DensityProfile::riemann(1.0, 0.0).unwrap();
    // v(x,t) = -t g(x/t) for the step
    for x in [-1.5, -0.5, 0.0, 0.4, 1.2] {
        let v = variational_v(x, 1.0, &step, &sf).unwrap();
        assert!(close(v, -g_legendre(x), 1e-9), "x={x}: {v}");
    }
}

fn triples() -> [(f64, f64, f64); 3] {
    [(0.1, 1.0, 0.5), (0.3, 1.0, 0.5), (0.7, 2.0, 1.0)]
}

#[test]
fn variational_v_matches_closed_form_on_a_grid() {
    for (rho, c1, c2) in triples().into_iter().chain([(0.95, 1.0, 0.5), (0.3, 0.5, 1.0)]) {
        let sf = SpeedFunction::two_phase(c1, c2).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let x = -1.5 + 3.0 * i as f64 / 19.0;
            for k in 1..=5 {
                let t = 0.4 * k as f64;
                let a = variational_v(x, t, &flat(rho), &sf).unwrap();
                let b = closed_form_v(x, t, rho, c1, c2).unwrap();
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst <= 1e-8, "({rho},{c1},{c2}) worst {worst}");
    }
}

#[test]
fn variational_path_realises_the_value() {
    let sf = SpeedFunction::two_phase(1.0, 0.5).unwrap();
    let rho0 = flat(0.3);
    for (x, t) in [(0.2, 1.0), (-0.1, 1.0), (-0.9, 0.7)] {
        let (v, path) = variational_path(x, t, &rho0, &sf, default_budget(&sf)).unwrap();
        let start = path.trajectory_positions().unwrap()[0];
        let again = rho0.antiderivative(start) - path.action(&sf).unwrap();
        assert!(close(again, v, 1e-9), "({x},{t}): {again} vs {v}");
    }
}

#[test]
fn v_is_lipschitz_with_density_bounds() {
    let sf = SpeedFunction::two_phase(1.0, 0.5).unwrap();
    for rho in [0.1, 0.3, 0.7] {
        let h = 0.01;
        let xs: Vec<f64> = (0..=200).map(|k| -1.0 + k as f64 * h).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| variational_v(x, 1.0, &flat(rho), &sf).unwrap()).collect();
        for w in vs.windows(2) {
            let dq = (w[1] - w[0]) / h;
            assert!((-1e-9..=1.0 + 1e-9).contains(&dq), "rho={rho}: {dq}");
        }
    }
}

#[test]
fn profile_reference_points() {
    let rs = 0.5 - 0.5 * 0.5f64.sqrt();
    assert!(close(two_phase_profile(0.3, 1.0, 0.5, 0.1, 1.0).unwrap(), 0.4, 1e-14));
    assert!(close(two_phase_profile(0.3, 1.0, 0.5, -0.1, 1.0).unwrap(), 1.0 - rs, 1e-14));
    assert!(close(two_phase_profile(0.3, 1.0, 0.5, -0.5, 1.0).unwrap(), 0.3, 1e-14));
    // case (i): interface plateau carries the left flux
    let r = two_phase_profile(0.1, 1.0, 0.5, 0.05, 1.0).unwrap();
    assert!(close(0.5 * r * (1.0 - r), 1.0 * 0.1 * 0.9, 1e-14));
    assert!(close(two_phase_profile(0.1, 1.0, 0.5, -0.05, 1.0).unwrap(), 0.1, 1e-14));
    // case (iii)
    assert!(close(two_phase_profile(0.7, 1.0, 0.5, 0.3, 1.0).unwrap(), 0.7, 1e-14));
    let top = two_phase_profile(0.7, 1.0, 0.5, -0.01, 1.0).unwrap();
    assert!(close(1.0 * top * (1.0 - top), 0.5 * 0.7 * 0.3, 1e-14));
    assert!(two_phase_profile(1.2, 1.0, 0.5, 0.0, 1.0).is_err());
    assert!(two_phase_profile(0.5, 1.0, 0.5, 0.0, 0.0).is_err());
}

#[test]
fn equal_rates_give_the_homogeneous_profile() {
    for rho in [0.1, 0.5, 0.9] {
        for x in [-0.7, -0.01, 0.0, 0.2, 0.9] {
            assert!(close(two_phase_profile(rho, 0.8, 0.8, x, 1.0).unwrap(), rho, 1e-12));
        }
    }
}

#[test]
fn profile_is_the_derivative_of_v() {
    for (rho, c1, c2) in triples().into_iter().chain([(0.95, 1.0, 0.5), (0.2, 1.0, 0.5)]) {
        let prof = TwoPhaseProfile::new(rho, c1, c2).unwrap();
        let t = 1.0;
        let jumps = prof.jumps(t);
        for k in 0..60 {
            let x = -1.5 + 3.0 * (k as f64 + 0.5) / 60.0;
            if jumps.iter().any(|j| (x - j).abs() < 0.02) {
                continue;
            }
            let h = 1e-5;
            let d = (closed_form_v(x + h, t, rho, c1, c2).unwrap() - closed_form_v(x - h, t, rho, c1, c2).unwrap()) / (2.0 * h);
            assert!(close(d, prof.density(x, t), 1e-6), "({rho},{c1},{c2}) x={x}: {d} vs {}", prof.density(x, t));
        }
    }
}

#[test]
fn reversed_rates_follow_particle_hole_symmetry() {
    // c1 < c2 is computed through the dual system; compare with an
    // independent derivative of the variational formula
    let (c1, c2) = (0.5, 1.0);
    let sf = SpeedFunction::two_phase(c1, c2).unwrap();
    for rho in [0.2, 0.6, 0.9] {
        let prof = TwoPhaseProfile::new(rho, c1, c2).unwrap();
        let jumps = prof.jumps(1.0);
        for k in 0..20 {
            let x = -1.2 + 2.4 * (k as f64 + 0.5) / 20.0;
            if jumps.iter().any(|j| (x - j).abs() < 0.03) || x.abs() < 0.03 {
                continue;
            }
            let h = 1e-4;
            let d = (variational_v(x + h, 1.0, &flat(rho), &sf).unwrap() - variational_v(x - h, 1.0, &flat(rho), &sf).unwrap())
                / (2.0 * h);
            assert!(close(d, prof.density(x, 1.0), 1e-5), "rho={rho} x={x}: {d} vs {}", prof.density(x, 1.0));
        }
    }
}

#[test]
fn profile_is_continuous_away_from_shocks() {
    for (rho, c1, c2) in triples() {
        let prof = TwoPhaseProfile::new(rho, c1, c2).unwrap();
        for t in [0.5, 1.0] {
            let jumps = prof.jumps(t);
            for b in prof.kinks(t) {
                if jumps.iter().any(|j| (b - j).abs() < 1e-12) {
                    continue;
                }
                let e = 1e-12;
                assert!(close(prof.density(b - e, t), prof.density(b + e, t), 1e-10), "({rho},{c1},{c2}) at {b}");
            }
        }
    }
}

#[test]
fn entropy_conditions_hold_for_closed_form_profiles() {
    for (rho, c1, c2) in triples().into_iter().chain([(0.95, 1.0, 0.5), (0.2, 0.5, 1.0)]) {
        let prof = TwoPhaseProfile::new(rho, c1, c2).unwrap();
        let rep = entropy_check(&prof, c1, c2, 1.0);
        assert!(rep.interior, "({rho},{c1},{c2}) {rep:?}");
        assert!(rep.boundary, "({rho},{c1},{c2}) {rep:?}");
        assert!(rep.flux_residual <= 1e-10, "({rho},{c1},{c2}) {rep:?}");
        assert!(rep.passed());
    }
    let case2 = entropy_check(&TwoPhaseProfile::new(0.3, 1.0, 0.5).unwrap(), 1.0, 0.5, 1.0);
    let rs = 0.5 - 0.5 * 0.5f64.sqrt();
    assert!(close(case2.left_limit, 1.0 - rs, 1e-12));
    assert!(close(case2.right_limit, 0.5, 1e-10));
    assert_eq!(case2.shocks.len(), 1);
}

#[test]
fn rarefaction_fan_has_no_shocks() {
    let fan = FnProfile(|x: f64, t: f64| (0.5 * (1.0 - x / t)).clamp(0.0, 1.0));
    let rep = entropy_check(&fan, 1.0, 1.0, 1.0);
    assert!(rep.shocks.is_empty());
    assert!(rep.interior && rep.boundary && rep.passed());
}

#[test]
fn swapped_profile_violates_entropy() {
    let good = TwoPhaseProfile::new(0.3, 1.0, 0.5).unwrap();
    let swapped = FnProfile(move |x: f64, t: f64| good.density(-x, t));
    let rep = entropy_check(&swapped, 1.0, 0.5, 1.0);
    assert!(!rep.passed());
    assert!(!rep.interior || rep.flux_residual > 1e-3);
}

fn bumps() -> Vec<Bump> {
    vec![
        Bump::new(0.0, 0.5, 0.6, 0.5).unwrap(),
        Bump::new(0.2, 0.8, 0.3, 0.3).unwrap(),
        Bump::new(-0.1, 0.3, 0.5, 0.4).unwrap(),
    ]
}

#[test]
fn bump_shape() {
    let b = Bump::new(0.0, 0.0, 1.0, 1.0).unwrap();
    assert_eq!(b.value(0.0, 0.0), 1.0);
    assert_eq!(b.value(1.0, 0.0), 0.0);
    let (dx, dt) = b.gradient(0.3, -0.2);
    let h = 1e-6;
    assert!(close(dx, (b.value(0.3 + h, -0.2) - b.value(0.3 - h, -0.2)) / (2.0 * h), 1e-8));
    assert!(close(dt, (b.value(0.3, -0.2 + h) - b.value(0.3, -0.2 - h)) / (2.0 * h), 1e-8));
    assert!(Bump::new(0.0, 0.0, 0.0, 1.0).is_err());
}

#[test]
fn gauss_legendre_nodes() {
    let (x, w) = gauss_legendre(5);
    let int = |f: &dyn Fn(f64) -> f64| x.iter().zip(&w).map(|(a, b)| b * f(*a)).sum::<f64>();
    assert!(close(int(&|_| 1.0), 2.0, 1e-14));
    assert!(close(int(&|t| t.powi(8)), 2.0 / 9.0, 1e-14));
    assert!(close(int(&|t| t.powi(9)), 0.0, 1e-14));
}

#[test]
fn weak_residual_of_an_exact_constant_state() {
    let prof = TwoPhaseProfile::new(0.4, 0.7, 0.7).unwrap();
    let r = weak_solution_residual(&prof, 0.7, 0.7, &bumps(), &Quadrature::default()).unwrap();
    assert!(r <= 1e-8, "{r}");
}

#[test]
fn weak_residual_of_the_two_phase_profiles() {
    for (rho, c1, c2) in triples() {
        let prof = TwoPhaseProfile::new(rho, c1, c2).unwrap();
        let coarse = weak_solution_residual(&prof, c1, c2, &bumps(), &Quadrature::default()).unwrap();
        let fine = weak_solution_residual(&prof, c1, c2, &bumps(), &Quadrature { panels: 200, order: 4 }).unwrap();
        assert!(coarse <= 1e-3, "({rho},{c1},{c2}) {coarse}");
        assert!(fine <= 1e-3 && (coarse - fine).abs() <= 1e-3);
    }
}

#[test]
fn frozen_profile_is_not_a_weak_solution() {
    let prof = TwoPhaseProfile::new(0.1, 1.0, 0.5).unwrap();
    let frozen = Frozen(&prof);
    let r = weak_solution_residual(&frozen, 1.0, 0.5, &bumps(), &Quadrature::default()).unwrap();
    assert!(r > 1e-2, "{r}");
}

#[test]
fn scaled_flux_duality() {
    // (c f)*(y) = c f*(y/c) with the concave flux f(ρ) = ρ(1-ρ) on [0,1]
    let c = 1.7;
    let rhos: Vec<f64> = (0..=4000).map(|k| k as f64 / 4000.0).collect();
    // convex form: -(c f)*(y) = sup_ρ { (-y)ρ - (-c f)(ρ) }
    let neg = GridFunction::from_fn(rhos, |r| -c * r * (1.0 - r)).unwrap();
    let ys: Vec<f64> = (0..=40).map(|k| 4.0 - 8.0 * k as f64 / 40.0).collect();
    let slopes: Vec<f64> = ys.iter().map(|y| -y).collect();
    let conj = legendre(&neg, &slopes).unwrap();
    for (k, &y) in ys.iter().enumerate() {
        let numeric = -conj.ys()[k];
        assert!(close(numeric, flux_conjugate(c, y), 1e-6), "y={y}");
        assert!(close(flux_conjugate(c, y), -c * g_legendre(y / c), 1e-14));
        let quad = quadratic_flux_conjugate(c, y);
        if y.abs() <= c {
            assert!(close(flux_conjugate(c, y), quad, 1e-12));
        } else {
            assert!(flux_conjugate(c, y) > quad);
        }
    }
}
