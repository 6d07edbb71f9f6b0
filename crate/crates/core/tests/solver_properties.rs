use std::sync::Arc;

use nblab_core::auxiliary::solve_elliptic_nonlocal;
use nblab_core::blowup::{default_q_candidates, estimate_blowup_time};
use nblab_core::domain::Domain1D;
use nblab_core::expr::FnTime;
use nblab_core::ode::{closed_form_blowup_time, solve_comparison_ode, ComparisonODE, OdeKind};
use nblab_core::pde::{lp_integral, solve, Grid1D, SolverConfig, Trajectory};
use nblab_core::ProblemSpec;
use proptest::prelude::*;

const C: [&str; 4] = ["1", "1 + x", "exp(-t)", "0"];
const K: [&str; 4] = ["0.5", "0.3*(1 + y)", "exp(-t)*(1 + x)", "0"];

fn run(spec: &ProblemSpec, n: usize, cfg: &SolverConfig) -> Trajectory {
    solve(spec, &Grid1D::new(spec.domain, n).unwrap(), cfg).unwrap()
}

fn flat_exact(p: f64, c: f64, u0: f64, t: f64) -> f64 {
    (u0.powf(1.0 - p) - (p - 1.0) * c * t).powf(1.0 / (1.0 - p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn heat_flow_conserves_mass(a1 in -0.4..0.4f64, a2 in -0.3..0.3f64, a3 in -0.2..0.2f64) {
        let u0 = format!("1 + {a1}*cos(pi*x) + {a2}*cos(2*pi*x) + {a3}*cos(3*pi*x)");
        let s = ProblemSpec::from_strings(1.0, 2.0, 2.0, "0", "0", &u0).unwrap();
        let traj = run(&s, 81, &SolverConfig::default());
        let w0 = traj.diagnostics[0].mass;
        for d in &traj.diagnostics {
            prop_assert!((d.mass - w0).abs() <= 1e-8 * w0, "t = {}: {} vs {w0}", d.t, d.mass);
        }
    }

    #[test]
    fn diagnostics_are_monotone_and_states_nonnegative(
        p in 1.0..3.0f64, l in 1.0..3.0f64, ci in 0..4usize, ki in 0..4usize,
        a in 0.05..0.6f64, b in 0.0..0.05f64,
    ) {
        let u0 = format!("{a} + {b}*cos(pi*x)");
        let s = ProblemSpec::from_strings(1.0, p, l, C[ci], K[ki], &u0).unwrap();
        let cfg = SolverConfig { output_times: vec![0.1, 0.2, 0.3, 0.4], ..SolverConfig::default().with_t_end(0.5).waived() };
        let traj = run(&s, 41, &cfg);
        for pair in traj.diagnostics.windows(2) {
            prop_assert!(pair[1].t > pair[0].t);
            prop_assert!(pair[1].j >= pair[0].j);
            prop_assert!(pair[1].mass >= pair[0].mass * (1.0 - 1e-10), "mass decreased at t = {}", pair[1].t);
        }
        for snap in &traj.snapshots {
            prop_assert!(snap.u.iter().all(|&u| u >= 0.0));
        }
    }

    #[test]
    fn nested_data_stay_ordered(
        ci in 0..3usize, ki in 0..3usize, a in 0.1..0.4f64, gap in 0.0..0.2f64,
    ) {
        let lower = ProblemSpec::from_strings(1.0, 2.0, 2.0, C[ci], K[ki], &format!("{a} + 0.05*cos(pi*x)")).unwrap();
        let upper = ProblemSpec::from_strings(1.0, 2.0, 2.0, C[ci], K[ki], &format!("{} + 0.05*cos(pi*x)", a + gap)).unwrap();
        let cfg = SolverConfig {
            output_times: (1..10).map(|i| i as f64 / 10.0).collect(),
            ..SolverConfig::default().waived()
        };
        let (lo, hi) = (run(&lower, 41, &cfg), run(&upper, 41, &cfg));
        // compare up to the first blow-up
        for (a, b) in lo.snapshots.iter().zip(&hi.snapshots).take_while(|(a, b)| a.t == b.t) {
            for (u, v) in a.u.iter().zip(&b.u) {
                prop_assert!(v - u >= -1e-6, "t = {}: {} < {}", a.t, v, u);
            }
        }
    }

    #[test]
    fn flat_runs_follow_the_ode(p in 1.5..2.5f64, c in 0.5..2.0f64, u0 in 0.5..2.0f64) {
        let s = ProblemSpec::from_strings(1.0, p, 2.0, &format!("{c}"), "0", &format!("{u0}")).unwrap();
        let exact = closed_form_blowup_time(p, c, u0);
        let cfg = SolverConfig { rtol: 1e-11, atol: 1e-13, u_max: 1e5, ..SolverConfig::default().with_t_end(2.0 * exact) };
        let traj = run(&s, 21, &cfg);
        prop_assert!(traj.verdict.is_blowup());
        for d in traj.diagnostics.iter().take_while(|d| d.sup_norm <= 1e4) {
            let u = flat_exact(p, c, u0, d.t);
            prop_assert!((d.sup_norm - u).abs() <= 1e-4 * u, "t = {}: {} vs {u}", d.t, d.sup_norm);
        }
    }

    #[test]
    fn flat_runs_recover_time_and_exponent(p in 1.5..3.5f64, c in 0.5..2.0f64, u0 in 0.5..2.0f64) {
        let s = ProblemSpec::from_strings(1.0, p, 2.0, &format!("{c}"), "0", &format!("{u0}")).unwrap();
        let exact = closed_form_blowup_time(p, c, u0);
        let traj = run(&s, 21, &SolverConfig::default().with_t_end(2.0 * exact));
        prop_assert!(!traj.verdict.is_global());
        let est = estimate_blowup_time(&traj, &default_q_candidates(p, 2.0)).unwrap();
        prop_assert!((est.t_est - exact).abs() <= 0.02 * exact, "T_est {} vs {exact}", est.t_est);
        prop_assert!((est.q_fit - p).abs() <= 0.1, "q_fit {} vs p = {p}", est.q_fit);
    }

    #[test]
    fn ode_matches_closed_form(q in 1.2..4.0f64, coeff in 0.2..5.0f64, w0 in prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(10.0)]) {
        let c0 = Arc::new(FnTime(move |_| coeff));
        let zero = Arc::new(FnTime(|_| 0.0));
        let ode = ComparisonODE::new(OdeKind::C0P, q, 2.0, c0, zero, w0).unwrap();
        let exact = closed_form_blowup_time(q, coeff, w0);
        let sol = solve_comparison_ode(&ode, 2.0 * exact).unwrap();
        let t = sol.blowup_time.unwrap();
        prop_assert!((t - exact).abs() <= 1e-6 * exact, "{t} vs {exact}");
    }

    #[test]
    fn elliptic_normalization_holds(g0 in 0.0..5.0f64, gl in 0.0..5.0f64) {
        prop_assume!(g0 + gl > 1e-3);
        let grid = Grid1D::new(Domain1D::unit(), 101).unwrap();
        let sol = solve_elliptic_nonlocal(g0, gl, &grid).unwrap();
        prop_assert!(sol.normalization_residual().abs() <= 1e-8);
        prop_assert!(sol.v.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn blowup_time_is_nonincreasing_in_data_and_rate() {
    let decay = Arc::new(FnTime(|t: f64| (-t).exp()));
    let zero = Arc::new(FnTime(|_| 0.0));
    let time = |scale: f64, w0: f64| {
        let c0 = Arc::new(FnTime({
            let decay = decay.clone();
            move |t| scale * nblab_core::TimeFunction::at(&decay, t).unwrap()
        }));
        let ode = ComparisonODE::new(OdeKind::C0P, 2.0, 2.0, c0, zero.clone(), w0).unwrap();
        solve_comparison_ode(&ode, 50.0).unwrap().blowup_time.unwrap_or(f64::INFINITY)
    };
    let levels = [0.25, 0.5, 1.0, 2.0, 4.0];
    for (i, &scale) in levels.iter().enumerate() {
        for (j, &w0) in levels.iter().enumerate() {
            let t = time(scale, w0);
            if i + 1 < levels.len() {
                assert!(time(levels[i + 1], w0) <= t, "rate {scale} -> {}", levels[i + 1]);
            }
            if j + 1 < levels.len() {
                assert!(time(scale, levels[j + 1]) <= t, "w0 {w0} -> {}", levels[j + 1]);
            }
        }
    }
    // w0 * scale > 1 is the blow-up condition for w' = scale e^{-t} w².
    assert!(time(1.0, 0.5).is_infinite());
    assert!((time(1.0, 2.0) - 2f64.ln()).abs() < 1e-6);
}

#[test]
fn mass_balance_matches_reaction_and_flux() {
    let s = ProblemSpec::from_strings(1.0, 2.0, 2.0, "1 + x", "0.5", "0.2 + 0.05*cos(pi*x)").unwrap();
    let grid = Grid1D::new(s.domain, 101).unwrap();
    let step = 0.01;
    let cfg = SolverConfig {
        output_times: (1..100).map(|i| i as f64 * step).collect(),
        ..SolverConfig::default().waived()
    };
    let traj = solve(&s, &grid, &cfg).unwrap();
    assert!(traj.verdict.is_global());
    let snaps = &traj.snapshots;
    for win in snaps.windows(3) {
        let (a, m, b) = (&win[0], &win[1], &win[2]);
        let dw = (grid.integrate(&b.u) - grid.integrate(&a.u)) / (b.t - a.t);
        let reaction: Vec<f64> = grid.nodes().iter().zip(&m.u).map(|(&x, &u)| (1.0 + x) * u * u).collect();
        let rhs = grid.integrate(&reaction) + 2.0 * 0.5 * lp_integral(&grid, &m.u, 2.0);
        assert!((dw - rhs).abs() <= 1e-3 * rhs, "t = {}: {dw} vs {rhs}", m.t);
    }
}
