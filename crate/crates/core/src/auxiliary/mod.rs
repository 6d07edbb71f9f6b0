//! Linear problems used by the global-existence constructions: the heat
//! equation with a prescribed Neumann flux `g(t)` and the criteria for its
//! boundedness, the elliptic problem `v'' = a v` with flux data, and the
//! shifted torsion function `ψ`.

mod counterexample;
mod elliptic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain1D, SpecError};
use crate::expr::{CoefficientExpr, EvalError, TimeFunction, Var, VarSet};
use crate::pde::{self, FluxModel, Grid1D, MolSystem, PdeError, SolverConfig, State, Trajectory, Verdict};
use crate::quad::{self, DoublingRule, ImproperIntegral, Tolerance};
use crate::report::CriterionReport;
use crate::tridiag::SingularSystem;

pub use counterexample::{counterexample_g, CounterexampleG};
pub use elliptic::{solve_elliptic_nonlocal, solve_psi, EllipticNonlocal};

#[derive(Debug, Error)]
pub enum AuxError {
    #[error("{0}")]
    Invalid(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Singular(#[from] SingularSystem),
}

/// `v_t = v_xx`, `∂v/∂ν = g(t)` at both endpoints, `v(·,0) = v0`.
#[derive(Clone)]
pub struct NeumannHeatProblem {
    pub domain: Domain1D,
    pub g: Arc<dyn TimeFunction>,
    pub v0: CoefficientExpr,
}

const SAMPLE_T: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];

impl NeumannHeatProblem {
    pub fn new(domain: Domain1D, g: Arc<dyn TimeFunction>, v0: CoefficientExpr) -> Result<Self, AuxError> {
        if !v0.used_vars().is_subset_of(VarSet::X) {
            return Err(AuxError::Invalid("initial datum may depend on x only".into()));
        }
        for t in SAMPLE_T {
            let v = g.at(t)?;
            if v < 0.0 {
                return Err(AuxError::Invalid(format!("flux must be nonnegative, g({t}) = {v}")));
            }
        }
        for i in 0..=100 {
            let x = domain.length() * i as f64 / 100.0;
            let v = v0.eval_xyt(x, 0.0, 0.0)?;
            if v < 0.0 {
                return Err(AuxError::Invalid(format!("initial datum must be nonnegative, v0({x}) = {v}")));
            }
        }
        Ok(NeumannHeatProblem { domain, g, v0 })
    }

    /// Outward slopes of `v0` minus `g(0)` at `x = 0` and `x = L`.
    pub fn compatibility_residuals(&self) -> Result<[f64; 2], AuxError> {
        let len = self.domain.length();
        let g0 = self.g.at(0.0)?;
        let slope = |x: f64, inward: f64| -> Result<f64, AuxError> {
            if let Ok(d) = self.v0.differentiate(Var::X) {
                return Ok(d.eval_xyt(x, 0.0, 0.0)?);
            }
            let delta = 1e-4 * len;
            let f = |y: f64| self.v0.eval_xyt(y, 0.0, 0.0);
            Ok(inward * (-3.0 * f(x)? + 4.0 * f(x + inward * delta)? - f(x + 2.0 * inward * delta)?) / (2.0 * delta))
        };
        Ok([-slope(0.0, 1.0)? - g0, slope(len, -1.0)? - g0])
    }

    pub fn is_compatible(&self, tol: f64) -> Result<bool, AuxError> {
        Ok(self.compatibility_residuals()?.iter().all(|r| r.abs() <= tol))
    }
}

/// Solves the prescribed-flux heat problem with the method-of-lines core.
/// `J` in the trajectory is `∫∫ v`.
pub fn solve_neumann_heat(prob: &NeumannHeatProblem, grid: &Grid1D, cfg: &SolverConfig) -> Result<Trajectory, AuxError> {
    solve_neumann_heat_observed(prob, grid, cfg, &mut |_| {})
}

pub fn solve_neumann_heat_observed(
    prob: &NeumannHeatProblem,
    grid: &Grid1D,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&State),
) -> Result<Trajectory, AuxError> {
    cfg.validate()?;
    if !cfg.waive_compatibility {
        let [left, right] = prob.compatibility_residuals()?;
        if left.abs() > 1e-6 || right.abs() > 1e-6 {
            return Err(AuxError::Invalid(format!(
                "initial datum is not compatible with g(0) (residuals {left:e}, {right:e})"
            )));
        }
    }
    let v0 = grid
        .nodes()
        .iter()
        .map(|&x| prob.v0.eval_xyt(x, 0.0, 0.0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sys = MolSystem::new(
        grid.clone(),
        CoefficientExpr::constant(0.0, VarSet::XT),
        1.0,
        FluxModel::Prescribed(prob.g.clone()),
    );
    Ok(pde::solve_system(&mut sys, v0, cfg, 1.0, observer)?)
}

/// `∫_{t-t0}^t g(τ)/√(t-τ) dτ` (window clipped at `τ = 0`), computed as
/// `2∫_0^{√t0} g(t - s²) ds`, which has no singularity.
pub fn window_integral(g: &dyn TimeFunction, t: f64, t0: f64) -> Result<f64, EvalError> {
    let width = t0.min(t);
    if width <= 0.0 {
        return Ok(0.0);
    }
    let top = width.sqrt();
    let mut cuts: Vec<f64> = g
        .breakpoints(t - width, t)
        .into_iter()
        .map(|tau| (t - tau).max(0.0).sqrt())
        .filter(|&s| s > 0.0 && s < top)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let v = quad::integrate(|s| g.at(t - s * s), 0.0, top, &cuts, Tolerance::default())?;
    Ok(2.0 * v)
}

/// `∫_{t-t0}^t g^q(τ) dτ`, window clipped at `τ = 0`.
pub fn power_window_integral(g: &dyn TimeFunction, t: f64, t0: f64, q: f64) -> Result<f64, EvalError> {
    let a = (t - t0).max(0.0);
    quad::integrate(|tau| Ok(g.at(tau)?.max(0.0).powf(q)), a, t, &g.breakpoints(a, t), Tolerance::default())
}

/// Relative growth of the running window supremum between `H/2` and `H`
/// below which it counts as stabilized.
pub const WINDOW_STABLE_GROWTH: f64 = 1e-2;
/// Default sampling horizon for the window criterion.
pub const DEFAULT_WINDOW_HORIZON: f64 = 128.0;
const UNIT_GRID_LIMIT: f64 = 16384.0;
const GEOMETRIC_FACTOR: f64 = 1.01;

/// Sample times `t ≥ alpha`: all `alpha + k` and every integer up to the
/// unit-grid limit, then a geometric grid, up to `horizon`.
pub fn window_sample_times(alpha: f64, horizon: f64) -> Vec<f64> {
    let mut ts = vec![alpha];
    let unit_end = horizon.min(UNIT_GRID_LIMIT);
    let mut k = 1.0;
    while alpha + k <= unit_end {
        ts.push(alpha + k);
        k += 1.0;
    }
    let mut n = alpha.ceil();
    while n <= unit_end {
        ts.push(n);
        n += 1.0;
    }
    let mut t = unit_end;
    while t < horizon {
        t = (t * GEOMETRIC_FACTOR).min(horizon);
        ts.push(t);
    }
    ts.push(horizon);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSup {
    /// `sup` over sampled `t ∈ [alpha, horizon]`.
    pub value: f64,
    /// `sup` over sampled `t ∈ [alpha, horizon/2]`.
    pub half_value: f64,
    pub argmax: f64,
    pub stable: bool,
}

fn window_sup(mut w: impl FnMut(f64) -> Result<f64, EvalError>, alpha: f64, horizon: f64) -> Result<WindowSup, EvalError> {
    let mut value = 0.0_f64;
    let mut half_value = 0.0_f64;
    let mut argmax = alpha;
    for t in window_sample_times(alpha, horizon) {
        let v = w(t)?;
        if !v.is_finite() {
            return Ok(WindowSup {
                value: f64::INFINITY,
                half_value,
                argmax: t,
                stable: false,
            });
        }
        if v > value {
            value = v;
            argmax = t;
        }
        if t <= 0.5 * horizon {
            half_value = half_value.max(v);
        }
    }
    let stable = value <= half_value * (1.0 + WINDOW_STABLE_GROWTH) || value == 0.0;
    Ok(WindowSup {
        value,
        half_value,
        argmax,
        stable,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    Bounded,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessCriteria {
    pub integral_of_g: ImproperIntegral,
    pub t0: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub window: WindowSup,
    /// Criterion (i): `∫_0^∞ g < ∞`.
    pub integral_finite: bool,
    /// Criterion (ii): the window integral stays bounded for `t ≥ alpha`.
    pub window_bounded: bool,
    pub verdict: Boundedness,
}

impl BoundednessCriteria {
    pub fn to_report(&self) -> CriterionReport {
        let mut r = CriterionReport::new(
            "neumann_boundedness",
            self.verdict == Boundedness::Bounded,
            match self.verdict {
                Boundedness::Bounded => "Bounded",
                Boundedness::Unbounded => "Unbounded",
            },
        )
        .with("integral_of_g", self.integral_of_g.value)
        .with("integral_horizon", self.integral_of_g.horizon)
        .with("t0", self.t0)
        .with("alpha", self.alpha)
        .with("horizon", self.horizon)
        .with("window_sup", self.window.value)
        .with("window_sup_half", self.window.half_value)
        .with("window_argmax", self.window.argmax);
        if !self.integral_finite {
            r = r.note("criterion (i) fails: the integral of g diverges");
        }
        if !self.window_bounded {
            r = r.note("criterion (ii) fails: the window supremum keeps growing");
        }
        r
    }
}

/// Tests `∫_0^∞ g < ∞` by horizon doubling and the stabilization of
/// `sup_{t ≥ alpha} ∫_{t-t0}^t g(τ)/√(t-τ) dτ` over `[alpha, horizon]`.
pub fn check_boundedness_criteria(
    g: &dyn TimeFunction,
    t0: f64,
    alpha: f64,
    horizon: f64,
) -> Result<BoundednessCriteria, AuxError> {
    if !(t0 > 0.0 && alpha > t0) {
        return Err(AuxError::Invalid(format!("need 0 < t0 < alpha, got t0={t0}, alpha={alpha}")));
    }
    if !(horizon >= 2.0 * alpha) {
        return Err(AuxError::Invalid(format!("horizon must be at least 2·alpha, got {horizon}")));
    }
    let integral_of_g = quad::improper(|t| g.at(t), |a, b| g.breakpoints(a, b), 0.0, 1.0, DoublingRule::default())?;
    let window = window_sup(|t| window_integral(g, t, t0), alpha, horizon)?;
    let integral_finite = integral_of_g.is_finite();
    let window_bounded = window.stable;
    Ok(BoundednessCriteria {
        integral_of_g,
        t0,
        alpha,
        horizon,
        window,
        integral_finite,
        window_bounded,
        verdict: if integral_finite && window_bounded {
            Boundedness::Bounded
        } else {
            Boundedness::Unbounded
        },
    })
}

/// The Hölder-type sufficient condition `sup_t ∫_{t-t0}^t g^q ≤ c`.
///
/// For `q > 2` it implies the window criterion, and the report records
/// whether that implication is observed. `q = 2` is accepted to exhibit
/// that the condition is then no longer sufficient.
pub fn check_holder_sufficient(
    g: &dyn TimeFunction,
    q: f64,
    t0: f64,
    alpha: f64,
    horizon: f64,
) -> Result<CriterionReport, AuxError> {
    if !(q >= 2.0) {
        return Err(AuxError::Invalid(format!("exponent q must be at least 2, got {q}")));
    }
    if !(t0 > 0.0 && alpha > t0 && horizon >= 2.0 * alpha) {
        return Err(AuxError::Invalid(format!(
            "need 0 < t0 < alpha and horizon >= 2·alpha, got t0={t0}, alpha={alpha}, horizon={horizon}"
        )));
    }
    let sup = window_sup(|t| power_window_integral(g, t, t0, q), alpha, horizon)?;
    let mut report = CriterionReport::new("holder_window", sup.stable, if sup.stable { "Bounded" } else { "Unbounded" })
        .with("q", q)
        .with("t0", t0)
        .with("alpha", alpha)
        .with("horizon", horizon)
        .with("window_sup", sup.value)
        .with("window_sup_half", sup.half_value);
    let criteria = check_boundedness_criteria(g, t0, alpha, horizon)?;
    report = report.with("window_criterion_bounded", if criteria.window_bounded { 1.0 } else { 0.0 });
    if q > 2.0 {
        let holds = !sup.stable || criteria.window_bounded;
        report = report.with("implication_holds", if holds { 1.0 } else { 0.0 });
        if !holds {
            report.passed = false;
            report = report.note("Hölder bound holds but the window criterion fails");
        }
    } else {
        report = report.note("q = 2 does not guarantee the window criterion");
    }
    Ok(report)
}

/// Sup-norm of a prescribed-flux heat solution at both ends of a time
/// window, and the relative growth `sup(t1)/sup(t0) - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatGrowth {
    pub window: [f64; 2],
    pub sup_start: f64,
    pub sup_end: f64,
    pub growth: f64,
    pub verdict: Verdict,
}

/// Solves up to the end of `window` (overriding `cfg.t_end` and the output
/// times) and measures the sup-norm growth across it.
pub fn heat_growth(
    prob: &NeumannHeatProblem,
    grid: &Grid1D,
    cfg: &SolverConfig,
    window: [f64; 2],
) -> Result<(HeatGrowth, Trajectory), AuxError> {
    let [t0, t1] = window;
    if !(t0 > 0.0 && t1 > t0 && t1.is_finite()) {
        return Err(AuxError::Invalid(format!("need 0 < t0 < t1, got window [{t0}, {t1}]")));
    }
    let cfg = SolverConfig {
        t_end: t1,
        output_times: vec![t0],
        ..cfg.clone()
    };
    let traj = solve_neumann_heat(prob, grid, &cfg)?;
    let sup_start = traj.snapshot_at(t0).map(pde::sup_norm).unwrap_or(f64::NAN);
    let sup_end = pde::sup_norm(traj.last_state());
    let growth = HeatGrowth {
        window,
        sup_start,
        sup_end,
        growth: sup_end / sup_start - 1.0,
        verdict: traj.verdict.clone(),
    };
    Ok((growth, traj))
}
