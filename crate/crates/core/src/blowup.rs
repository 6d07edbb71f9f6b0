//! Blow-up time estimation, the `J` growth check, and the boundary
//! localization experiment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ProblemSpec, SpecError};
use crate::export::{csv_table, LinePlot, Series};
use crate::expr::EvalError;
use crate::pde::{solve_observed, Grid1D, PdeError, SolverConfig, State, Trajectory, Verdict};
use crate::report::CriterionReport;

#[derive(Debug, Error)]
pub enum BlowupError {
    #[error("trajectory does not blow up ({0})")]
    NotBlowup(String),
    #[error("insufficient growth data: {found} points above {level:e}, need {needed}")]
    InsufficientGrowth { found: usize, needed: usize, level: f64 },
    #[error("no candidate exponent gives a blow-up time after the last accepted step")]
    NoFit,
    #[error("hypothesis fails: {0}")]
    Hypothesis(String),
    #[error("{0}")]
    Invalid(String),
    #[error("the run reached t_end without blowing up; the hypotheses are not met")]
    Global,
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// Sup-norm above which diagnostics count as growth data.
pub const GROWTH_LEVEL: f64 = 100.0;
pub const MIN_GROWTH_POINTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimateMethod {
    RateFit,
    StepCollapseTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t_est: f64,
    pub method: EstimateMethod,
    pub q_fit: f64,
    pub r2: f64,
    /// Number of diagnostics in the fitting window.
    pub points: usize,
    pub t_last: f64,
}

/// Exponents `1.1, 1.15, …, 5.0`, plus `p` and `l` where they exceed 1.
pub fn default_q_candidates(p: f64, l: f64) -> Vec<f64> {
    let mut qs: Vec<f64> = (0..=78).map(|k| (110 + 5 * k) as f64 / 100.0).collect();
    qs.extend([p, l].into_iter().filter(|&q| q > 1.0));
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    qs
}

/// Least-squares line `y ≈ a + b x`, returning `(a, b, R²)`. `R²` is 1 for
/// data with no spread and clipped to `[0, 1]`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(&xi, &yi)| (yi - a - b * xi).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (a, b, r2)
}

fn stop_time(traj: &Trajectory) -> Result<f64, BlowupError> {
    match traj.verdict {
        Verdict::BlowUpDetected { t_stop, .. } | Verdict::StepCollapse { t_stop } => Ok(t_stop),
        Verdict::ReachedTEnd => Err(BlowupError::NotBlowup("verdict is ReachedTEnd".into())),
    }
}

/// Indices of the last decade of sup-norm growth: diagnostics with
/// `sup ≥ max(GROWTH_LEVEL, sup_final / 10)` after the last time the
/// sup-norm was below that level.
fn growth_window(traj: &Trajectory) -> Result<Vec<usize>, BlowupError> {
    let d = &traj.diagnostics;
    let total = d.iter().filter(|p| p.sup_norm > GROWTH_LEVEL).count();
    if total < MIN_GROWTH_POINTS {
        return Err(BlowupError::InsufficientGrowth {
            found: total,
            needed: MIN_GROWTH_POINTS,
            level: GROWTH_LEVEL,
        });
    }
    let last = d.last().map(|p| p.sup_norm).unwrap_or(0.0);
    let level = (last / 10.0).max(GROWTH_LEVEL);
    let start = d.iter().rposition(|p| p.sup_norm < level).map_or(0, |i| i + 1);
    let mut window: Vec<usize> = (start..d.len()).collect();
    if window.len() < MIN_GROWTH_POINTS {
        let start = d.iter().rposition(|p| p.sup_norm <= GROWTH_LEVEL).map_or(0, |i| i + 1);
        window = (start..d.len()).collect();
    }
    if window.len() < MIN_GROWTH_POINTS {
        return Err(BlowupError::InsufficientGrowth {
            found: window.len(),
            needed: MIN_GROWTH_POINTS,
            level: GROWTH_LEVEL,
        });
    }
    Ok(window)
}

/// Fits `sup^{1-q}` against `t` on the last decade of growth for each
/// candidate `q > 1` and extrapolates the zero crossing of the best fit.
///
/// A step-collapse run without enough growth data falls back to the
/// collapse time plus the last step.
pub fn estimate_blowup_time(traj: &Trajectory, q_candidates: &[f64]) -> Result<BlowupEstimate, BlowupError> {
    let t_stop = stop_time(traj)?;
    let d = &traj.diagnostics;
    let t_last = d.last().map_or(0.0, |p| p.t);
    let window = match growth_window(traj) {
        Ok(w) => w,
        Err(e) => {
            if matches!(traj.verdict, Verdict::StepCollapse { .. }) {
                let dt = d.last().map_or(0.0, |p| p.dt).max(f64::EPSILON * t_stop.abs().max(1.0));
                return Ok(BlowupEstimate {
                    t_est: t_stop + dt,
                    method: EstimateMethod::StepCollapseTime,
                    q_fit: f64::NAN,
                    r2: 0.0,
                    points: 0,
                    t_last,
                });
            }
            return Err(e);
        }
    };
    let ts: Vec<f64> = window.iter().map(|&i| d[i].t).collect();
    let mut best: Option<BlowupEstimate> = None;
    for &q in q_candidates.iter().filter(|&&q| q > 1.0 && q.is_finite()) {
        let ys: Vec<f64> = window.iter().map(|&i| d[i].sup_norm.powf(1.0 - q)).collect();
        let (a, b, r2) = linear_fit(&ts, &ys);
        if !(b < 0.0) {
            continue;
        }
        let t_est = -a / b;
        if !(t_est > t_last && t_est.is_finite()) {
            continue;
        }
        if best.as_ref().map_or(true, |e| r2 > e.r2) {
            best = Some(BlowupEstimate {
                t_est,
                method: EstimateMethod::RateFit,
                q_fit: q,
                r2,
                points: window.len(),
                t_last,
            });
        }
    }
    best.ok_or(BlowupError::NoFit)
}

/// Checks the discrete `J` series of a blow-up run:
/// (i) `J' ≥ c J^l` over the final half of the run with the largest such
/// `c` reported and required positive, and (ii) the slope of `log J`
/// against `log(T_est − t)` on the last decade of growth is at least
/// `−1.25/(l−1)`.
pub fn j_inequality_check(traj: &Trajectory, k_inf: f64, l: f64) -> Result<CriterionReport, BlowupError> {
    if !(l > 1.0) {
        return Err(BlowupError::Invalid(format!("the J inequality needs l > 1, got {l}")));
    }
    if !(k_inf > 0.0) {
        return Err(BlowupError::Hypothesis(format!("inf k must be positive, got {k_inf}")));
    }
    let t_stop = stop_time(traj)?;
    let d = &traj.diagnostics;
    if d.last().map_or(true, |p| p.j <= 0.0) {
        return Err(BlowupError::NotBlowup("J vanishes identically".into()));
    }
    let est = estimate_blowup_time(traj, &default_q_candidates(l, l))?;

    let mut c = f64::INFINITY;
    for i in 1..d.len().saturating_sub(1) {
        if d[i].t < 0.5 * t_stop || d[i].j <= 0.0 {
            continue;
        }
        let slope = (d[i + 1].j - d[i - 1].j) / (d[i + 1].t - d[i - 1].t);
        c = c.min(slope / d[i].j.powf(l));
    }

    let window = growth_window(traj)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = window
        .iter()
        .filter(|&&i| d[i].j > 0.0)
        .map(|&i| ((est.t_est - d[i].t).ln(), d[i].j.ln()))
        .unzip();
    let (_, slope, r2) = linear_fit(&xs, &ys);
    let bound = -1.0 / (l - 1.0);
    let floor = 1.25 * bound;
    let derivative_ok = c > 0.0 && c.is_finite();
    let slope_ok = slope >= floor;
    let passed = derivative_ok && slope_ok;
    let mut report = CriterionReport::new("j_inequality", passed, if passed { "Holds" } else { "Violated" })
        .with("c", c)
        .with("k_inf", k_inf)
        .with("l", l)
        .with("t_est", est.t_est)
        .with("q_fit", est.q_fit)
        .with("slope", slope)
        .with("slope_r2", r2)
        .with("slope_bound", bound)
        .with("slope_floor", floor);
    if !derivative_ok {
        report = report.note("no positive c satisfies J' >= c J^l on the final half");
    }
    if !slope_ok {
        report = report.note("J grows faster than the (T - t)^(-1/(l-1)) rate allows");
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationConfig {
    /// Interior set `[ε, L − ε]`.
    pub eps_dist: f64,
    pub nodes: usize,
    pub solver: SolverConfig,
}

impl LocalizationConfig {
    /// `ε = L/4` on 201 nodes. The solver stops at sup-norm `1e6` with a
    /// step floor of `1e-16`, which keeps the run inside double-precision
    /// time resolution for `l` up to about 3.
    pub fn for_length(length: f64) -> Self {
        LocalizationConfig {
            eps_dist: length / 4.0,
            nodes: 201,
            solver: SolverConfig {
                u_max: 1e6,
                dt_min: 1e-16,
                t_end: 10.0,
                waive_compatibility: true,
                ..SolverConfig::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSample {
    pub t: f64,
    pub left: f64,
    pub right: f64,
    pub interior_max: f64,
}

impl LocalizationSample {
    pub fn boundary_max(&self) -> f64 {
        self.left.max(self.right)
    }
}

/// Interior maximum in `[ε, L − ε]` of the final decade of growth, fitted
/// as `C (T_est − t)^{slope}` in log–log form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorFit {
    pub slope: f64,
    /// Fit quality used for the check: the centered `R²`, or 1 when the
    /// series is flat (see [`FLAT_SPREAD`]).
    pub r2: f64,
    pub r2_centered: f64,
    /// Relative spread `max/min − 1` of the interior maximum on the window.
    pub spread: f64,
    /// `−1/(l−1)`.
    pub bound_exponent: f64,
    /// Smallest `C` with `interior ≤ C (T_est − t)^{−1/(l−1)}` on the window.
    pub c_bound: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub eps_dist: f64,
    pub u_max: f64,
    pub verdict: Verdict,
    pub estimate: BlowupEstimate,
    pub boundary_max_at_stop: f64,
    pub interior_max_at_stop: f64,
    pub ratio_at_stop: f64,
    pub fit: InteriorFit,
    pub boundary_ok: bool,
    pub ratio_ok: bool,
    pub fit_ok: bool,
    pub passed: bool,
    pub samples: Vec<LocalizationSample>,
}

pub const RATIO_LIMIT: f64 = 0.2;
pub const FIT_R2: f64 = 0.9;
/// An interior series whose relative spread on the fitting window is
/// below this is treated as constant: the power law with exponent 0 fits
/// it exactly, and its centered `R²` measures only rounding.
pub const FLAT_SPREAD: f64 = 1e-3;

impl LocalizationReport {
    pub fn to_csv(&self) -> String {
        csv_table(
            &["t", "boundary_max", "interior_max"],
            self.samples.iter().map(|s| [s.t, s.boundary_max(), s.interior_max]),
        )
    }

    pub fn plot(&self) -> LinePlot {
        let pick = |f: fn(&LocalizationSample) -> f64| self.samples.iter().map(|s| (s.t, f(s))).collect();
        LinePlot::new("Boundary vs interior maximum", "t", "max u")
            .log_y()
            .with(Series::new("boundary", pick(LocalizationSample::boundary_max)))
            .with(Series::new("interior", pick(|s| s.interior_max)))
    }

    pub fn to_report(&self) -> CriterionReport {
        let mut r = CriterionReport::new(
            "boundary_localization",
            self.passed,
            if self.passed { "BoundaryOnly" } else { "NotLocalized" },
        )
        .with("eps_dist", self.eps_dist)
        .with("t_est", self.estimate.t_est)
        .with("boundary_max_at_stop", self.boundary_max_at_stop)
        .with("interior_max_at_stop", self.interior_max_at_stop)
        .with("ratio_at_stop", self.ratio_at_stop)
        .with("fit_slope", self.fit.slope)
        .with("fit_r2", self.fit.r2)
        .with("fit_r2_centered", self.fit.r2_centered)
        .with("interior_spread", self.fit.spread)
        .with("fit_c", self.fit.c_bound)
        .with("bound_exponent", self.fit.bound_exponent);
        if !self.boundary_ok {
            r = r.note("boundary maximum at stop is below u_max/2");
        }
        if !self.ratio_ok {
            r = r.note("interior/boundary ratio at stop is not below 0.2");
        }
        if !self.fit_ok {
            r = r.note("interior maximum does not fit under the (T - t)^(-1/(l-1)) rate");
        }
        r
    }
}

const HYPOTHESIS_T_SAMPLES: usize = 101;

fn inf_k(spec: &ProblemSpec, grid: &Grid1D, t_end: f64) -> Result<f64, EvalError> {
    let len = spec.domain.length();
    let mut inf = f64::INFINITY;
    for j in 0..HYPOTHESIS_T_SAMPLES {
        let t = t_end * j as f64 / (HYPOTHESIS_T_SAMPLES - 1) as f64;
        for xb in [0.0, len] {
            for &y in grid.nodes() {
                inf = inf.min(spec.k.eval_xyt(xb, y, t)?);
            }
        }
    }
    Ok(inf)
}

/// Runs the problem to blow-up and compares the solution on the boundary
/// with its maximum over the interior set `[ε, L − ε]`.
pub fn interior_localization(spec: &ProblemSpec, cfg: &LocalizationConfig) -> Result<LocalizationReport, BlowupError> {
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    let len = spec.domain.length();
    if !(cfg.eps_dist > 0.0 && cfg.eps_dist < len / 2.0) {
        return Err(BlowupError::Invalid(format!("eps_dist must lie in (0, L/2), got {}", cfg.eps_dist)));
    }
    if !(p <= 1.0 && l > 1.0) {
        return Err(BlowupError::Hypothesis(format!("localization needs p <= 1 < l, got p={p}, l={l}")));
    }
    let grid = Grid1D::new(spec.domain, cfg.nodes)?;
    let k_inf = inf_k(spec, &grid, cfg.solver.t_end)?;
    if !(k_inf > 0.0) {
        return Err(BlowupError::Hypothesis(format!("inf k must be positive, sampled {k_inf}")));
    }

    let inner: Vec<usize> = grid
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= cfg.eps_dist - 1e-12 * len && x <= len - cfg.eps_dist + 1e-12 * len)
        .map(|(i, _)| i)
        .collect();
    if inner.is_empty() {
        return Err(BlowupError::Invalid("no grid node lies in the interior set".into()));
    }
    let n = grid.len();
    let mut samples = Vec::new();
    let traj = solve_observed(spec, &grid, &cfg.solver, &mut |s: &State| {
        samples.push(LocalizationSample {
            t: s.t,
            left: s.u[0],
            right: s.u[n - 1],
            interior_max: inner.iter().map(|&i| s.u[i]).fold(0.0, f64::max),
        });
    })?;
    if !traj.verdict.is_blowup() {
        return match traj.verdict {
            Verdict::ReachedTEnd => Err(BlowupError::Global),
            _ => Err(BlowupError::NotBlowup(format!("run ended with {}", traj.verdict.label()))),
        };
    }
    let estimate = estimate_blowup_time(&traj, &default_q_candidates(p, l))?;

    let window = growth_window(&traj)?;
    let bound_exponent = -1.0 / (l - 1.0);
    let mut xs = Vec::with_capacity(window.len());
    let mut ys = Vec::with_capacity(window.len());
    let mut c_bound: f64 = 0.0;
    for &i in &window {
        let s = &samples[i];
        let tau = estimate.t_est - s.t;
        xs.push(tau.ln());
        ys.push(s.interior_max.ln());
        c_bound = c_bound.max(s.interior_max * tau.powf(-bound_exponent));
    }
    let (_, slope, r2_centered) = linear_fit(&xs, &ys);
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let spread = (hi - lo).exp() - 1.0;
    let fit = InteriorFit {
        slope,
        r2: if spread < FLAT_SPREAD { 1.0 } else { r2_centered },
        r2_centered,
        spread,
        bound_exponent,
        c_bound,
        points: window.len(),
    };

    let last = *samples.last().expect("observer sees the initial state");
    let boundary_max_at_stop = last.boundary_max();
    let ratio_at_stop = last.interior_max / boundary_max_at_stop;
    let boundary_ok = boundary_max_at_stop > 0.5 * cfg.solver.u_max;
    let ratio_ok = ratio_at_stop < RATIO_LIMIT;
    let fit_ok = fit.slope >= bound_exponent && fit.r2 >= FIT_R2;
    Ok(LocalizationReport {
        eps_dist: cfg.eps_dist,
        u_max: cfg.solver.u_max,
        verdict: traj.verdict,
        estimate,
        boundary_max_at_stop,
        interior_max_at_stop: last.interior_max,
        ratio_at_stop,
        fit,
        boundary_ok,
        ratio_ok,
        fit_ok,
        passed: boundary_ok && ratio_ok && fit_ok,
        samples,
    })
}
