use super::{lp_integral, sup_norm, Diagnostic, Grid1D, MolSystem, PdeError, SolverConfig, State, Trajectory, Verdict};
use crate::domain::{check_compatibility, ProblemSpec};
use crate::rk::{self, BOGACKI_SHAMPINE};

/// Solves the problem on `grid` under `cfg`.
pub fn solve(spec: &ProblemSpec, grid: &Grid1D, cfg: &SolverConfig) -> Result<Trajectory, PdeError> {
    solve_observed(spec, grid, cfg, &mut |_| {})
}

/// As [`solve`], calling `observer` on the initial state and on every
/// accepted state.
pub fn solve_observed(
    spec: &ProblemSpec,
    grid: &Grid1D,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&State),
) -> Result<Trajectory, PdeError> {
    cfg.validate()?;
    if !cfg.waive_compatibility {
        let report = check_compatibility(spec, None)?;
        if !report.passed {
            return Err(PdeError::Incompatible {
                left: report.get("residual_left").unwrap_or(f64::NAN),
                right: report.get("residual_right").unwrap_or(f64::NAN),
                report: Box::new(report),
            });
        }
    }
    let u0 = grid
        .nodes()
        .iter()
        .map(|&x| spec.u0.eval_xyt(x, 0.0, 0.0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sys = MolSystem::from_spec(spec, grid.clone());
    solve_system(&mut sys, u0, cfg, spec.exponents.l, observer)
}

/// Integrates an assembled system from `u0` at `t = 0`; `l` is the
/// exponent used for the `J` diagnostic.
pub fn solve_system(
    sys: &mut MolSystem,
    u0: Vec<f64>,
    cfg: &SolverConfig,
    l: f64,
    observer: &mut dyn FnMut(&State),
) -> Result<Trajectory, PdeError> {
    cfg.validate()?;
    let grid = sys.grid().clone();
    if u0.len() != grid.len() {
        return Err(PdeError::InvalidConfig("initial vector does not match the grid".into()));
    }
    if u0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(PdeError::InvalidConfig("initial data must be finite and nonnegative".into()));
    }

    let mut outputs: Vec<f64> = cfg
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < cfg.t_end)
        .collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    outputs.push(cfg.t_end);
    let mut next_out = 0;

    let cap = cfg.safety * grid.spacing() * grid.spacing() / 2.0;
    let mut state = State { t: 0.0, u: u0 };
    let mut traj = Trajectory {
        snapshots: vec![state.clone()],
        diagnostics: vec![Diagnostic {
            t: 0.0,
            mass: grid.integrate(&state.u),
            sup_norm: sup_norm(&state),
            j: 0.0,
            dt: 0.0,
        }],
        verdict: Verdict::ReachedTEnd,
        l,
        clamp_events: 0,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    observer(&state);

    let n = grid.len();
    let mut f0 = vec![0.0; n];
    match sys.eval(0.0, &state.u, &mut f0) {
        Ok(()) => {}
        Err(PdeError::Overflow) => {
            traj.verdict = Verdict::BlowUpDetected {
                t_stop: 0.0,
                reason: "overflow in the reaction or flux term".into(),
            };
            return Ok(traj);
        }
        Err(e) => return Err(e),
    }
    if sup_norm(&state) > cfg.u_max {
        traj.verdict = Verdict::BlowUpDetected {
            t_stop: 0.0,
            reason: format!("sup-norm exceeds {:e}", cfg.u_max),
        };
        return Ok(traj);
    }

    let mut lp_prev = lp_integral(&grid, &state.u, l);
    let mut j = 0.0;
    let mut dt = cfg.dt_init;
    let mut overflowed = false;
    let floor = -10.0 * cfg.atol;

    let mut rhs = |t: f64, u: &[f64], out: &mut [f64]| -> Result<(), PdeError> {
        match sys.eval(t, u, out) {
            Err(PdeError::Overflow) => {
                out.fill(f64::INFINITY);
                Ok(())
            }
            other => other,
        }
    };

    loop {
        let target = outputs[next_out];
        let remaining = target - state.t;
        let mut h = dt.min(cfg.dt_max).min(cap);
        let hits = remaining <= h * (1.0 + 1e-12);
        if hits {
            h = remaining;
        }
        if h < cfg.dt_min && !hits {
            traj.verdict = if overflowed {
                Verdict::BlowUpDetected {
                    t_stop: state.t,
                    reason: "overflow in the reaction or flux term".into(),
                }
            } else {
                Verdict::StepCollapse { t_stop: state.t }
            };
            break;
        }

        let trial = rk::try_step(&BOGACKI_SHAMPINE, &mut rhs, state.t, &state.u, &f0, h, cfg.rtol, cfg.atol)?;
        let Some(mut trial) = trial else {
            overflowed = true;
            traj.rejected_steps += 1;
            dt = 0.5 * h;
            continue;
        };
        if trial.err > 1.0 {
            traj.rejected_steps += 1;
            dt = rk::next_step(h, trial.err, BOGACKI_SHAMPINE.error_order);
            continue;
        }
        if trial.y.iter().any(|&v| v < floor) {
            traj.rejected_steps += 1;
            dt = 0.5 * h;
            continue;
        }
        let mut clamped = 0;
        for v in trial.y.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
        overflowed = false;

        let t_new = if hits { target } else { state.t + h };
        if clamped > 0 {
            traj.clamp_events += clamped;
            rhs(t_new, &trial.y, &mut trial.f_new)?;
        }
        state.t = t_new;
        state.u = trial.y;
        f0 = trial.f_new;
        traj.accepted_steps += 1;

        let lp = lp_integral(&grid, &state.u, l);
        j += 0.5 * h * (lp_prev + lp);
        lp_prev = lp;
        let sup = sup_norm(&state);
        traj.diagnostics.push(Diagnostic {
            t: state.t,
            mass: grid.integrate(&state.u),
            sup_norm: sup,
            j,
            dt: h,
        });
        observer(&state);

        if !hits {
            dt = rk::next_step(h, trial.err, BOGACKI_SHAMPINE.error_order);
        }
        if sup > cfg.u_max || f0.iter().any(|v| !v.is_finite()) {
            traj.verdict = Verdict::BlowUpDetected {
                t_stop: state.t,
                reason: if sup > cfg.u_max {
                    format!("sup-norm exceeds {:e}", cfg.u_max)
                } else {
                    "overflow in the reaction or flux term".into()
                },
            };
            break;
        }
        if hits {
            if next_out + 1 == outputs.len() {
                traj.verdict = Verdict::ReachedTEnd;
                break;
            }
            traj.snapshots.push(state.clone());
            next_out += 1;
        }
    }
    traj.snapshots.push(state);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain1D;
    use crate::pde::mass;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(Domain1D::unit(), n).unwrap()
    }

    #[test]
    fn heat_conserves_mass_and_decays() {
        let spec = ProblemSpec::from_strings(1.0, 2.0, 2.0, "0", "0", "1 + cos(pi*x)").unwrap();
        let g = grid(51);
        let cfg = SolverConfig {
            output_times: vec![0.1, 0.5],
            ..SolverConfig::default()
        };
        let tr = solve(&spec, &g, &cfg).unwrap();
        assert_eq!(tr.verdict, Verdict::ReachedTEnd);
        let w0 = tr.diagnostics[0].mass;
        for d in &tr.diagnostics {
            assert!((d.mass - w0).abs() <= 1e-8 * w0, "{d:?}");
        }
        let last = tr.last_state();
        assert_eq!(last.t, 1.0);
        let exact_sup = 1.0 + (-PI * PI).exp();
        assert!((sup_norm(last) - exact_sup).abs() < 1e-3);
        assert_eq!(tr.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(), vec![0.0, 0.1, 0.5, 1.0]);
        assert_eq!(tr.clamp_events, 0);
    }

    #[test]
    fn flat_blowup_near_half() {
        let spec = ProblemSpec::from_strings(1.0, 2.0, 2.0, "1", "0", "2").unwrap();
        let tr = solve(&spec, &grid(21), &SolverConfig::default()).unwrap();
        let Verdict::BlowUpDetected { t_stop, .. } = tr.verdict else {
            panic!("{:?}", tr.verdict)
        };
        // u = 1/(1/2 - t) reaches 1e8 at t = 0.5 - 1e-8
        assert!((t_stop - 0.5).abs() < 1e-3, "{t_stop}");
    }

    #[test]
    fn zero_stays_zero() {
        let spec = ProblemSpec::from_strings(1.0, 2.0, 2.0, "0", "1", "0").unwrap();
        let tr = solve(&spec, &grid(21), &SolverConfig::default()).unwrap();
        assert_eq!(tr.verdict, Verdict::ReachedTEnd);
        assert!(tr.last_state().u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incompatible_data_is_refused_unless_waived() {
        let spec = ProblemSpec::from_strings(1.0, 2.0, 2.0, "0", "5", "1").unwrap();
        let g = grid(21);
        let cfg = SolverConfig::default().with_t_end(0.01);
        assert!(matches!(solve(&spec, &g, &cfg), Err(PdeError::Incompatible { .. })));
        assert!(solve(&spec, &g, &cfg.waived()).is_ok());
    }

    #[test]
    fn j_is_nondecreasing_and_matches_mass_for_l1() {
        let spec = ProblemSpec::from_strings(1.0, 2.0, 1.0, "0", "0", "1 + cos(pi*x)").unwrap();
        let g = grid(31);
        let tr = solve(&spec, &g, &SolverConfig::default().with_t_end(0.5)).unwrap();
        for w in tr.diagnostics.windows(2) {
            assert!(w[1].j >= w[0].j);
            assert!(w[1].t > w[0].t);
        }
        // l = 1 and conserved mass 1: J(t) = t
        let last = tr.diagnostics.last().unwrap();
        assert!((last.j - 0.5).abs() < 1e-8);
        assert!((mass(&g, tr.last_state()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn runs_are_bit_identical() {
        let spec = ProblemSpec::from_strings(1.0, 2.0, 2.0, "exp(-t)", "0.1", "0.5").unwrap();
        let g = grid(21);
        let cfg = SolverConfig::default().with_t_end(0.3).waived();
        let a = solve(&spec, &g, &cfg).unwrap();
        let b = solve(&spec, &g, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
