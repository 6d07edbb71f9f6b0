use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::verify::{Profile, ProfileSample, VerificationGrid, VerificationReport};
use super::{eigen_first_dirichlet, SuperConfig, SuperError};
use crate::auxiliary::{check_boundedness_criteria, solve_elliptic_nonlocal, solve_neumann_heat, solve_psi, NeumannHeatProblem};
use crate::domain::{ProblemSpec, ReducedCoefficients, Reduction};
use crate::expr::{CoefficientExpr, EvalError, FnTime, TimeFunction, VarSet};
use crate::ode::{integral_to_infinity, weighted_integral};
use crate::pde::{power, Grid1D, SolverConfig};
use crate::quad::{self, Tolerance};
use crate::report::CriterionReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "SMALL_EXP")]
    SmallExp,
    #[serde(rename = "SUPERLINEAR")]
    Superlinear,
    #[serde(rename = "P1_EXP")]
    P1Exp,
    #[serde(rename = "P1_BOUNDED")]
    P1Bounded,
    #[serde(rename = "L1_PG1")]
    L1Pg1,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::SmallExp => "SMALL_EXP",
            Family::Superlinear => "SUPERLINEAR",
            Family::P1Exp => "P1_EXP",
            Family::P1Bounded => "P1_BOUNDED",
            Family::L1Pg1 => "L1_PG1",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Family> {
        Family::all().into_iter().find(|f| f.tag().eq_ignore_ascii_case(tag))
    }

    pub fn all() -> [Family; 5] {
        [Family::SmallExp, Family::Superlinear, Family::P1Exp, Family::P1Bounded, Family::L1Pg1]
    }
}

/// `f` and `∫_0^t f` on the verification times.
#[derive(Clone, Debug)]
struct Series {
    values: Vec<f64>,
    primitive: Vec<f64>,
}

fn primitive_on(
    mut f: impl FnMut(f64) -> Result<f64, EvalError>,
    breaks: &dyn TimeFunction,
    times: &[f64],
) -> Result<Vec<f64>, EvalError> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in times.windows(2) {
        acc += quad::integrate(&mut f, w[0], w[1], &breaks.breakpoints(w[0], w[1]), Tolerance::default())?;
        out.push(acc);
    }
    Ok(out)
}

fn series(f: &dyn TimeFunction, times: &[f64]) -> Result<Series, EvalError> {
    Ok(Series {
        values: times.iter().map(|&t| f.at(t)).collect::<Result<_, _>>()?,
        primitive: primitive_on(|t| f.at(t), f, times)?,
    })
}

/// `∫_0^t f` tabulated at knots and interpolated by cubic Hermite
/// polynomials using `f` itself as the slope.
struct Primitive {
    knots: Vec<f64>,
    values: Vec<f64>,
    rates: Vec<f64>,
}

impl Primitive {
    /// Knots refine each verification interval `refine` times, then step by
    /// `tail_step` up to `horizon`.
    fn build(f: &dyn TimeFunction, times: &[f64], refine: usize, horizon: f64, tail_step: f64) -> Result<Self, EvalError> {
        let mut knots = vec![0.0];
        for w in times.windows(2) {
            for j in 1..=refine {
                knots.push(if j == refine {
                    w[1]
                } else {
                    w[0] + (w[1] - w[0]) * j as f64 / refine as f64
                });
            }
        }
        let mut t = *knots.last().expect("nonempty");
        while t < horizon {
            t = (t + tail_step).min(horizon);
            knots.push(t);
        }
        let values = primitive_on(|s| f.at(s), f, &knots)?;
        let rates = knots.iter().map(|&s| f.at(s)).collect::<Result<_, _>>()?;
        Ok(Primitive { knots, values, rates })
    }

    fn at(&self, t: f64) -> f64 {
        let last = self.knots.len() - 1;
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.knots[last] {
            return self.values[last] + self.rates[last] * (t - self.knots[last]);
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        if s == 0.0 {
            return self.values[i];
        }
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.values[i]
            + (s3 - 2.0 * s2 + s) * h * self.rates[i]
            + (-2.0 * s3 + 3.0 * s2) * self.values[i + 1]
            + (s3 - s2) * h * self.rates[i + 1]
    }
}

/// `k1(t) exp[(l - 1) ∫_0^t c1]`.
struct WeightedFlux {
    k1: Arc<dyn TimeFunction>,
    c1: Arc<Primitive>,
    rate: f64,
}

impl TimeFunction for WeightedFlux {
    fn at(&self, t: f64) -> Result<f64, EvalError> {
        let k = self.k1.at(t)?;
        if k == 0.0 {
            return Ok(0.0);
        }
        Ok(k * (self.rate * self.c1.at(t)).exp())
    }
}

/// A semi-discrete Neumann heat solution on the verification times, with
/// the ghost-node Laplacian that is its exact time derivative.
#[derive(Debug)]
struct HeatData {
    v: Vec<Vec<f64>>,
    lap: Vec<Vec<f64>>,
    g: Vec<f64>,
    sup: f64,
}

fn ghost_laplacian(h: f64, v: &[f64], flux: [f64; 2]) -> Vec<f64> {
    let n = v.len();
    let inv = 1.0 / (h * h);
    let mut out = vec![0.0; n];
    out[0] = (2.0 * (v[1] - v[0]) + 2.0 * h * flux[0]) * inv;
    for i in 1..n - 1 {
        out[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv;
    }
    out[n - 1] = (2.0 * (v[n - 2] - v[n - 1]) + 2.0 * h * flux[1]) * inv;
    out
}

/// `1 + g(0) (x - L/2)² / L`, which is positive with outward slope `g(0)`
/// at both ends.
fn compatible_initial(len: f64, g0: f64) -> Result<CoefficientExpr, SuperError> {
    Ok(CoefficientExpr::parse(&format!("1 + {g0:?} * (x - {:?})^2 / {len:?}", 0.5 * len), VarSet::X)?)
}

fn solve_heat(
    grid: &Grid1D,
    g: Arc<dyn TimeFunction>,
    v0: CoefficientExpr,
    times: &[f64],
    cfg: &SuperConfig,
) -> Result<HeatData, SuperError> {
    let domain = crate::domain::Domain1D::new(grid.length())?;
    let prob = NeumannHeatProblem::new(domain, g.clone(), v0)?;
    let t_end = *times.last().expect("nonempty");
    let solver = SolverConfig {
        t_end,
        output_times: times.to_vec(),
        waive_compatibility: true,
        ..cfg.solver.clone()
    };
    let traj = solve_neumann_heat(&prob, grid, &solver)?;
    if !traj.verdict.is_global() {
        return Err(SuperError::Invalid(format!("auxiliary heat solve stopped early: {:?}", traj.verdict)));
    }
    let h = grid.spacing();
    let mut v = Vec::with_capacity(times.len());
    let mut lap = Vec::with_capacity(times.len());
    let mut gs = Vec::with_capacity(times.len());
    for &t in times {
        let snap = traj
            .snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-12 * t_end)
            .ok_or_else(|| SuperError::Invalid(format!("auxiliary heat solve has no snapshot at t={t}")))?;
        let gt = g.at(t)?;
        lap.push(ghost_laplacian(h, &snap.u, [gt, gt]));
        v.push(snap.u.clone());
        gs.push(gt);
    }
    let sup = traj.sup_norm_max().max(v.iter().flatten().fold(0.0, |a: f64, &b| a.max(b)));
    Ok(HeatData { v, lap, g: gs, sup })
}

#[derive(Clone)]
enum Shape {
    SmallExp {
        phi: Vec<f64>,
        dphi_sq: Vec<f64>,
        lambda1: f64,
        slope: f64,
    },
    Superlinear {
        heat: Arc<HeatData>,
        c1: Arc<Series>,
        c1_total: f64,
        p: f64,
    },
    P1Exp {
        c1: Arc<Series>,
        gamma: f64,
        psi: Vec<f64>,
    },
    P1Bounded {
        heat: Arc<HeatData>,
        c1: Arc<Series>,
    },
    L1Pg1 {
        h: Arc<Vec<f64>>,
        h_xx: Arc<Vec<f64>>,
        h_flux: [f64; 2],
        c1: Arc<dyn TimeFunction>,
        c1_values: Arc<Vec<f64>>,
        p: f64,
        horizon: f64,
    },
}

/// One of the five explicit supersolutions, with its parameters, sampled on
/// the grid and times it was built for.
///
/// Families built on numerical auxiliary solutions (`SUPERLINEAR`,
/// `P1_BOUNDED`, `L1_PG1`) report the derivatives of the semi-discrete
/// problem those solutions satisfy exactly, so the verifier checks the
/// supersolution property of the grid problem.
#[derive(Clone)]
pub struct SupersolutionCandidate {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub derived: BTreeMap<String, f64>,
    /// Initial datum the candidate is checked against: `u0` for
    /// `SMALL_EXP`, the admissible cap for the other families.
    pub target: Vec<f64>,
    pub report: VerificationReport,
    pub aux: BTreeMap<String, String>,
    pub tol: f64,
    vgrid: Arc<VerificationGrid>,
    shape: Shape,
    /// Time factor `m(t_i)` and `m'(t_i)`.
    factor: Vec<(f64, f64)>,
}

/// Serializable description of a candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub derived: BTreeMap<String, f64>,
    pub t_end: f64,
    pub time_nodes: usize,
    pub grid_nodes: usize,
    pub length: f64,
    pub aux: BTreeMap<String, String>,
    pub tol: f64,
    pub report: VerificationReport,
}

impl std::fmt::Debug for SupersolutionCandidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SupersolutionCandidate")
            .field("family", &self.family)
            .field("params", &self.params)
            .field("derived", &self.derived)
            .field("passed", &self.report.passed)
            .finish()
    }
}

impl SupersolutionCandidate {
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn grid(&self) -> &Grid1D {
        self.vgrid.grid()
    }

    pub fn times(&self) -> &[f64] {
        self.vgrid.times()
    }

    pub fn verification_grid(&self) -> &VerificationGrid {
        &self.vgrid
    }

    pub fn record(&self) -> CandidateRecord {
        let times = self.times();
        CandidateRecord {
            family: self.family,
            params: self.params.clone(),
            derived: self.derived.clone(),
            t_end: *times.last().expect("nonempty"),
            time_nodes: times.len(),
            grid_nodes: self.grid().len(),
            length: self.grid().length(),
            aux: self.aux.clone(),
            tol: self.tol,
            report: self.report,
        }
    }

    fn time_index(&self, t: f64) -> Result<usize, SuperError> {
        let times = self.times();
        let scale = times.last().copied().unwrap_or(1.0);
        let i = times.partition_point(|&s| s < t - 1e-12 * scale);
        if i < times.len() && (times[i] - t).abs() <= 1e-12 * scale {
            Ok(i)
        } else {
            Err(SuperError::Invalid(format!("candidate is only sampled at its verification times, not t={t}")))
        }
    }

    pub fn sample_index(&self, i: usize) -> ProfileSample {
        let (m, dm) = self.factor[i];
        let scale = |v: &[f64], s: f64| v.iter().map(|x| s * x).collect::<Vec<f64>>();
        match &self.shape {
            Shape::SmallExp {
                phi,
                dphi_sq,
                lambda1,
                slope,
            } => {
                let a = self.param("a");
                let b = self.param("b");
                let u: Vec<f64> = phi.iter().map(|&f| m * (-a * f).exp()).collect();
                let u_t = scale(&u, b);
                let u_xx = u
                    .iter()
                    .zip(phi.iter().zip(dphi_sq))
                    .map(|(&v, (&f, &d))| (a * a * d + a * lambda1 * f) * v)
                    .collect();
                let n = u.len();
                let flux = [a * slope * u[0], a * slope * u[n - 1]];
                ProfileSample { u, u_t, u_xx, flux }
            }
            Shape::Superlinear { heat, .. } | Shape::P1Bounded { heat, .. } => {
                let v = &heat.v[i];
                let lap = &heat.lap[i];
                ProfileSample {
                    u: scale(v, m),
                    u_t: v.iter().zip(lap).map(|(&v, &d)| dm * v + m * d).collect(),
                    u_xx: scale(lap, m),
                    flux: [m * heat.g[i], m * heat.g[i]],
                }
            }
            Shape::P1Exp { gamma, psi, .. } => ProfileSample {
                u: scale(psi, m),
                u_t: scale(psi, dm),
                u_xx: vec![m; psi.len()],
                flux: [m * gamma, m * gamma],
            },
            Shape::L1Pg1 { h, h_xx, h_flux, .. } => ProfileSample {
                u: scale(h, m),
                u_t: scale(h, dm),
                u_xx: scale(h_xx, m),
                flux: [m * h_flux[0], m * h_flux[1]],
            },
        }
    }

    /// Nodal values at a verification time.
    pub fn values_at(&self, t: f64) -> Result<Vec<f64>, SuperError> {
        Ok(self.sample_index(self.time_index(t)?).u)
    }

    /// `ū(·, 0)`: initial data below it lead to solutions below `ū`.
    pub fn cap(&self) -> Vec<f64> {
        self.sample_index(0).u
    }

    /// Verifies against the stored target.
    pub fn verify(&self) -> Result<VerificationReport, SuperError> {
        self.vgrid.check_against(self, &self.target, self.tol)
    }

    /// Verifies against the datum this parameter choice admits.
    pub(crate) fn verify_own(&self) -> Result<VerificationReport, SuperError> {
        match self.family {
            Family::SmallExp => self.verify(),
            _ => self.vgrid.check_against(self, &self.cap(), self.tol),
        }
    }

    /// The same candidate with one parameter replaced; derived quantities are
    /// recomputed and the target is kept.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, SuperError> {
        if !self.params.contains_key(name) {
            return Err(SuperError::Invalid(format!("{} has no parameter `{name}`", self.family.tag())));
        }
        let mut next = self.clone();
        next.params.insert(name.to_string(), value);
        next.refresh()?;
        Ok(next)
    }

    /// Rebuilds the target from the current parameters and re-verifies.
    pub(crate) fn settle(mut self) -> Result<Self, SuperError> {
        if self.family != Family::SmallExp {
            self.target = self.cap();
        }
        self.report = self.verify()?;
        Ok(self)
    }

    fn refresh(&mut self) -> Result<(), SuperError> {
        let times = self.vgrid.times().to_vec();
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(SuperError::Invalid(format!("parameter {name} must be finite and nonnegative, got {v}")))
            }
        };
        match &mut self.shape {
            Shape::SmallExp { .. } => {
                let b = pos("b", self.params["b"])?;
                let d = pos("d", self.params["d"])?;
                pos("a", self.params["a"])?;
                self.factor = times
                    .iter()
                    .map(|&t| {
                        let m = d * (b * t).exp();
                        (m, b * m)
                    })
                    .collect();
            }
            Shape::Superlinear { c1, c1_total, p, .. } => {
                let a = pos("a", self.params["a"])?;
                let v = pos("V", self.params["V"])?;
                let q = *p - 1.0;
                let rate = power(a, q) * power(v, q);
                let big_a = 1.0 + q * rate * *c1_total;
                self.derived.insert("A".into(), big_a);
                let mut factor = Vec::with_capacity(times.len());
                for (&ci, &ii) in c1.values.iter().zip(&c1.primitive) {
                    let base = big_a - q * rate * ii;
                    if !(base > 0.0) {
                        return Err(SuperError::NonFinite(format!("f(t) blows up: A - (p-1)·… = {base}")));
                    }
                    let f = base.powf(-1.0 / q);
                    factor.push((a * f, a * rate * ci * f.powf(*p)));
                }
                self.factor = factor;
            }
            Shape::P1Exp { c1, gamma, psi } => {
                let b = pos("b", self.params["b"])?;
                let eps = pos("epsilon", self.params["epsilon"])?;
                let shift = pos("C", self.params["C"])?;
                *psi = solve_psi(self.vgrid.grid(), shift)?;
                self.derived.insert("sup_psi".into(), psi.iter().fold(0.0, |a: f64, &b| a.max(b)));
                self.derived.insert("min_psi".into(), psi.iter().fold(f64::INFINITY, |a: f64, &b| a.min(b)));
                self.derived.insert("gamma".into(), *gamma);
                self.factor = times
                    .iter()
                    .zip(c1.values.iter().zip(&c1.primitive))
                    .map(|(&t, (&ci, &ii))| {
                        let m = b * (ii + eps * t).exp();
                        (m, (ci + eps) * m)
                    })
                    .collect();
            }
            Shape::P1Bounded { c1, .. } => {
                let a = pos("a", self.params["a"])?;
                self.factor = c1
                    .values
                    .iter()
                    .zip(&c1.primitive)
                    .map(|(&ci, &ii)| {
                        let m = a * ii.exp();
                        (m, ci * m)
                    })
                    .collect();
            }
            Shape::L1Pg1 {
                c1,
                c1_values,
                p,
                horizon,
                ..
            } => {
                let a = pos("a", self.params["a"])?;
                let s = pos("S", self.params["S"])?;
                let q = *p - 1.0;
                let c1 = c1.clone();
                let weighted = primitive_on(
                    |t| {
                        let v = c1.at(t)?;
                        Ok(if v == 0.0 { 0.0 } else { v * (q * a * t).exp() })
                    },
                    &*c1,
                    &times,
                )?;
                let rate = FnTime(move |_| a);
                let total = weighted_integral(&*c1, &rate, q, *horizon)?;
                if !total.is_finite() {
                    return Err(SuperError::Hypothesis(format!(
                        "∫ c1(t) exp[(p-1) a t] dt diverges for a = {a}"
                    )));
                }
                let big_a = 1.0 + q * s * total.value;
                self.derived.insert("A".into(), big_a);
                self.derived.insert("weighted_integral".into(), total.value);
                let mut factor = Vec::with_capacity(times.len());
                for ((&t, &ci), &wi) in times.iter().zip(c1_values.iter()).zip(&weighted) {
                    let base = big_a - q * s * wi;
                    if !(base > 0.0) {
                        return Err(SuperError::NonFinite(format!("f(t) blows up at t={t}")));
                    }
                    let f = (a * t).exp() * base.powf(-1.0 / q);
                    factor.push((f, a * f + s * ci * f.powf(*p)));
                }
                self.factor = factor;
            }
        }
        Ok(())
    }
}

impl Profile for SupersolutionCandidate {
    fn sample(&self, grid: &Grid1D, t: f64) -> Result<ProfileSample, SuperError> {
        if grid.len() != self.grid().len() || grid.length() != self.grid().length() {
            return Err(SuperError::Invalid("candidate was built for a different grid".into()));
        }
        Ok(self.sample_index(self.time_index(t)?))
    }
}

fn build(
    family: Family,
    params: BTreeMap<String, f64>,
    derived: BTreeMap<String, f64>,
    aux: BTreeMap<String, String>,
    vgrid: Arc<VerificationGrid>,
    shape: Shape,
    cfg: &SuperConfig,
) -> Result<SupersolutionCandidate, SuperError> {
    let target = vgrid.initial().to_vec();
    let report = VerificationReport {
        interior: super::ResidualMin {
            value: f64::NAN,
            scaled: f64::NAN,
            x: 0.0,
            t: 0.0,
        },
        boundary: super::ResidualMin {
            value: f64::NAN,
            scaled: f64::NAN,
            x: 0.0,
            t: 0.0,
        },
        initial: super::ResidualMin {
            value: f64::NAN,
            scaled: f64::NAN,
            x: 0.0,
            t: 0.0,
        },
        tol: cfg.tol,
        passed: false,
    };
    let mut cand = SupersolutionCandidate {
        family,
        params,
        derived,
        target,
        report,
        aux,
        tol: cfg.tol,
        vgrid,
        shape,
        factor: Vec::new(),
    };
    cand.refresh()?;
    cand.settle()
}

fn require_verified(cand: SupersolutionCandidate) -> Result<SupersolutionCandidate, SuperError> {
    if cand.report.passed {
        Ok(cand)
    } else {
        Err(SuperError::Unverified(format!(
            "{}: r_int={:e}, r_bnd={:e}, r_init={:e}",
            cand.family.tag(),
            cand.report.interior.scaled,
            cand.report.boundary.scaled,
            cand.report.initial.scaled
        )))
    }
}

fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn text(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn unweighted_kernel_sup(spec: &ProblemSpec, grid: &Grid1D, times: &[f64]) -> Result<[f64; 2], SuperError> {
    let len = grid.length();
    let mut sup = [0.0_f64; 2];
    for &t in times {
        for &y in grid.nodes() {
            sup[0] = sup[0].max(spec.k.eval_xyt(0.0, y, t)?);
            sup[1] = sup[1].max(spec.k.eval_xyt(len, y, t)?);
        }
    }
    Ok(sup)
}

/// The hypotheses of the small-data global existence result for the
/// spec's regime (`SUPERLINEAR` for `p, l > 1`, `P1_BOUNDED` for
/// `p = 1 < l`, `L1_PG1` for `l = 1 < p`), checked without building a
/// supersolution. `None` for regimes without such a result.
pub fn small_data_hypotheses(
    spec: &ProblemSpec,
    grid: &Grid1D,
    cfg: &SuperConfig,
) -> Result<Option<CriterionReport>, SuperError> {
    cfg.validate()?;
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    let c1 = reduced(spec, grid, Reduction::C1);
    let k1 = reduced(spec, grid, Reduction::K1);
    let finish = |family: Family, checks: &[(&str, bool)], quantities: &[(&str, f64)]| {
        let holds = checks.iter().all(|c| c.1);
        let mut r = CriterionReport::new("small_data_global", holds, if holds { "Holds" } else { "Fails" })
            .note(format!("family {}", family.tag()));
        for (k, v) in quantities {
            r = r.with(k, *v);
        }
        for (name, ok) in checks {
            if !ok {
                r = r.note(format!("{name} fails"));
            }
        }
        r
    };
    let report = if p > 1.0 && l > 1.0 {
        let ic = integral_to_infinity(&*c1, cfg.integral_horizon)?;
        let ik = integral_to_infinity(&*k1, cfg.integral_horizon)?;
        let window = check_boundedness_criteria(&*k1, cfg.window_t0, cfg.window_alpha, cfg.window_horizon)?;
        finish(
            Family::Superlinear,
            &[
                ("integrability of c1", ic.is_finite()),
                ("integrability of k1", ik.is_finite()),
                ("window bound on k1", window.window_bounded),
            ],
            &[("integral_c1", ic.value), ("integral_k1", ik.value), ("window_sup_k1", window.window.value)],
        )
    } else if p == 1.0 && l > 1.0 {
        let ig = weighted_integral(&*k1, &*c1, l - 1.0, cfg.integral_horizon)?;
        let (bounded, sup) = if ig.is_finite() {
            let times = cfg.times();
            let horizon = cfg.t_end.max(cfg.window_horizon) + 1.0;
            let table = Arc::new(Primitive::build(&*c1, &times, 8, horizon, 1.0 / 16.0)?);
            let g = WeightedFlux {
                k1: k1.clone(),
                c1: table,
                rate: l - 1.0,
            };
            let w = check_boundedness_criteria(&g, cfg.window_t0, cfg.window_alpha, cfg.window_horizon)?;
            (w.window_bounded, w.window.value)
        } else {
            (false, f64::INFINITY)
        };
        finish(
            Family::P1Bounded,
            &[("integrability of k1 exp[(l-1)∫c1]", ig.is_finite()), ("window bound on the weighted flux", bounded)],
            &[("integral_g", ig.value), ("window_sup_g", sup)],
        )
    } else if l == 1.0 && p > 1.0 {
        let k2 = unweighted_kernel_sup(spec, grid, &cfg.times())?;
        let a = k2[0] + k2[1];
        let rate = FnTime(move |_| a);
        let total = weighted_integral(&*c1, &rate, p - 1.0, cfg.integral_horizon)?;
        finish(
            Family::L1Pg1,
            &[("positivity of k2", a > 0.0), ("integrability of c1 exp[(p-1)at]", total.is_finite())],
            &[("a", a), ("weighted_integral", total.value)],
        )
    } else {
        return Ok(None);
    };
    Ok(Some(report))
}

const BISECTION_ROUNDS: usize = 200;
const BISECTION_TOL: f64 = 1e-12;

/// `ū = d exp[bt - aφ(x)]` for `max(p, l) ≤ 1`, with
/// `b ≥ a² sup|φ'|² + aλ₁ + M max{1, d^{p-1} e^{a(1-p)}}`,
/// `a ≥ M|Ω| d^{l-1} / max(-∂φ/∂ν)` and `d ≥ e^a sup u0`, where `M` bounds
/// `c` and `k` on `[0, T]`. The bound on `c` enters the first inequality
/// and the bound on `k` the second.
pub fn construct_small_exponent(
    spec: &ProblemSpec,
    grid: &Grid1D,
    cfg: &SuperConfig,
) -> Result<SupersolutionCandidate, SuperError> {
    cfg.validate()?;
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    if p.max(l) > 1.0 {
        return Err(SuperError::Hypothesis(format!("need max(p, l) <= 1, got p={p}, l={l}")));
    }
    let times = cfg.times();
    let vgrid = Arc::new(VerificationGrid::new(spec, grid, &times)?);
    let c_sup = (0..times.len())
        .flat_map(|i| vgrid.reaction_row(i).iter().copied())
        .fold(0.0, f64::max);
    let [k_left, k_right] = unweighted_kernel_sup(spec, grid, &times)?;
    let k_sup = k_left.max(k_right);
    let eig = eigen_first_dirichlet(grid);
    let omega = grid.length();
    let slope = -eig.dphi_dnu_max;
    let sup_u0 = vgrid.initial().iter().fold(0.0, |a: f64, &b| a.max(b));
    let s = if sup_u0 > 0.0 { sup_u0 } else { 1.0 };

    // a - g(a) with g(a) = M|Ω| (e^a s)^{l-1} / slope is increasing for
    // l <= 1, so the smallest admissible a is bracketed by [0, g(0)].
    let g = |a: f64| k_sup * omega * (a.exp() * s).powf(l - 1.0) / slope;
    let (mut lo, mut hi) = (0.0_f64, g(0.0));
    let mut rounds = 0;
    while hi - lo > BISECTION_TOL * hi {
        rounds += 1;
        if rounds > BISECTION_ROUNDS || !hi.is_finite() {
            return Err(SuperError::NoConvergence {
                rounds,
                last: map(&[("a_lo", lo), ("a_hi", hi)]),
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid >= g(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a = hi;
    let d = a.exp() * s;
    let b = a * a * eig.sup_grad_sq() + a * eig.lambda1 + c_sup * 1f64.max(d.powf(p - 1.0) * (a * (1.0 - p)).exp());

    let shape = Shape::SmallExp {
        phi: eig.phi.clone(),
        dphi_sq: eig.dphi_sq.clone(),
        lambda1: eig.lambda1,
        slope,
    };
    let derived = map(&[
        ("M", c_sup.max(k_sup)),
        ("M_c", c_sup),
        ("M_k", k_sup),
        ("lambda1", eig.lambda1),
        ("lambda1_fd", eig.lambda1_fd),
        ("sup_grad_sq", eig.sup_grad_sq()),
        ("sup_u0", sup_u0),
        ("rounds", rounds as f64),
    ]);
    let aux = text(&[("phi", format!("sin(pi*x/{:?})", grid.length()))]);
    require_verified(build(
        Family::SmallExp,
        map(&[("a", a), ("b", b), ("d", d)]),
        derived,
        aux,
        vgrid,
        shape,
        cfg,
    )?)
}

const DYADIC_STEPS: i32 = 27;

fn reduced(spec: &ProblemSpec, grid: &Grid1D, which: Reduction) -> Arc<dyn TimeFunction> {
    Arc::new(ReducedCoefficients::new(spec, grid.len()).function(which))
}

/// Largest dyadic `a ≤ 1` with `1 - a^{l-1} V^l |Ω| ≥ 0` whose candidate
/// verifies.
fn dyadic_search(
    l: f64,
    sup_v: f64,
    omega: f64,
    mut make: impl FnMut(f64) -> Result<SupersolutionCandidate, SuperError>,
) -> Result<SupersolutionCandidate, SuperError> {
    let mut last = String::from("boundary smallness never satisfied");
    for j in 0..=DYADIC_STEPS {
        let a = 2f64.powi(-j);
        let smallness = 1.0 - power(a, l - 1.0) * power(sup_v, l) * omega;
        if smallness < 0.0 {
            continue;
        }
        let mut cand = make(a)?;
        cand.derived.insert("smallness".into(), smallness);
        if cand.report.passed {
            return Ok(cand);
        }
        last = format!("a={a} fails verification");
    }
    Err(SuperError::NoAdmissible(format!("no a >= 2^-{DYADIC_STEPS}: {last}")))
}

/// `ū = a f(t) v(x,t)` for `p, l > 1`, where `v` solves the heat equation
/// with flux `k1(t) = sup k` and
/// `f = (A - (p-1) a^{p-1} V^{p-1} ∫_0^t c1)^{-1/(p-1)}`.
pub fn construct_superlinear(
    spec: &ProblemSpec,
    grid: &Grid1D,
    cfg: &SuperConfig,
    v0: Option<CoefficientExpr>,
) -> Result<SupersolutionCandidate, SuperError> {
    cfg.validate()?;
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    if !(p > 1.0 && l > 1.0) {
        return Err(SuperError::Hypothesis(format!("need min(p, l) > 1, got p={p}, l={l}")));
    }
    let c1 = reduced(spec, grid, Reduction::C1);
    let k1 = reduced(spec, grid, Reduction::K1);
    let ic = integral_to_infinity(&*c1, cfg.integral_horizon)?;
    let ik = integral_to_infinity(&*k1, cfg.integral_horizon)?;
    if !(ic.is_finite() && ik.is_finite()) {
        return Err(SuperError::Hypothesis("∫_0^∞ (c1 + k1) dt diverges".into()));
    }
    let window = check_boundedness_criteria(&*k1, cfg.window_t0, cfg.window_alpha, cfg.window_horizon)?;
    if !window.window_bounded {
        return Err(SuperError::Hypothesis("the window integral of k1 is unbounded".into()));
    }
    let times = cfg.times();
    let vgrid = Arc::new(VerificationGrid::new(spec, grid, &times)?);
    let v0 = match v0 {
        Some(e) => e,
        None => compatible_initial(grid.length(), k1.at(0.0)?)?,
    };
    let v0_text = v0.source();
    let heat = Arc::new(solve_heat(grid, k1.clone(), v0, &times, cfg)?);
    let sup_v = heat.sup;
    let c1_series = Arc::new(series(&*c1, &times)?);
    let omega = grid.length();
    dyadic_search(l, sup_v, omega, |a| {
        build(
            Family::Superlinear,
            map(&[("a", a), ("V", sup_v)]),
            map(&[("integral_c1", ic.value), ("integral_k1", ik.value), ("window_sup_k1", window.window.value)]),
            text(&[("v0", v0_text.clone()), ("g", "k1(t) = sup k".into())]),
            vgrid.clone(),
            Shape::Superlinear {
                heat: heat.clone(),
                c1: c1_series.clone(),
                c1_total: ic.value,
                p,
            },
            cfg,
        )
    })
}

/// Options for [`construct_p1_exp`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct P1ExpOptions {
    pub epsilon: f64,
    /// `ψ(0) = C`; by default the smallest value with `min ψ ≥ 1/ε`, plus
    /// a relative margin.
    pub shift: Option<f64>,
    /// `K` in `∫ k dy ≤ K exp[-(l-1)(∫c1 + εt)]`; by default the smallest
    /// constant that works on `[0, T]`.
    pub k_bound: Option<f64>,
}

const PSI_MARGIN: f64 = 1e-3;

/// `ū = b exp[∫_0^t c1 + εt] ψ(x)` for `p = 1 < l`, with `ψ'' = 1`,
/// `∂ψ/∂ν = L/2` and `min ψ ≥ 1/ε`.
pub fn construct_p1_exp(
    spec: &ProblemSpec,
    grid: &Grid1D,
    cfg: &SuperConfig,
    opts: P1ExpOptions,
) -> Result<SupersolutionCandidate, SuperError> {
    cfg.validate()?;
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    if !(p == 1.0 && l > 1.0) {
        return Err(SuperError::Hypothesis(format!("need p = 1 < l, got p={p}, l={l}")));
    }
    let eps = opts.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SuperError::Hypothesis(format!("ε must be positive, got {eps}")));
    }
    let times = cfg.times();
    let vgrid = Arc::new(VerificationGrid::new(spec, grid, &times)?);
    let c1 = reduced(spec, grid, Reduction::C1);
    let c1_series = Arc::new(series(&*c1, &times)?);

    let ratios: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mass = |b| vgrid.kernel_row(i, b).iter().sum::<f64>();
            let big_f = c1_series.primitive[i] + eps * t;
            mass(0).max(mass(1)) * ((l - 1.0) * big_f).exp()
        })
        .collect();
    let observed = ratios.iter().copied().fold(0.0, f64::max);
    let k_bound = match opts.k_bound {
        Some(k) => {
            if observed > k * (1.0 + 1e-12) {
                return Err(SuperError::Hypothesis(format!(
                    "∫k dy exceeds K exp[-(l-1)(∫c1 + εt)] with K={k} (needs {observed})"
                )));
            }
            k
        }
        None => {
            let half = times.len() / 2;
            let early = ratios[..=half].iter().copied().fold(0.0, f64::max);
            let late = ratios[half..].iter().copied().fold(0.0, f64::max);
            if late > early * (1.0 + 1e-9) {
                return Err(SuperError::Hypothesis(format!(
                    "∫k dy · exp[(l-1)(∫c1 + εt)] keeps growing ({early:e} on [0, T/2], {late:e} on [T/2, T])"
                )));
            }
            observed
        }
    };

    let len = grid.length();
    let shift = opts.shift.unwrap_or((1.0 + PSI_MARGIN) / eps + len * len / 8.0);
    let min_psi = shift - len * len / 8.0;
    if min_psi * eps < 1.0 {
        return Err(SuperError::Hypothesis(format!("min ψ = {min_psi} is below 1/ε = {}", 1.0 / eps)));
    }
    let psi = solve_psi(grid, shift)?;
    let sup_psi = psi.iter().fold(0.0, |a: f64, &b| a.max(b));
    let gamma = 0.5 * len;
    let b = if k_bound > 0.0 {
        (gamma / (k_bound * sup_psi.powf(l))).powf(1.0 / (l - 1.0))
    } else {
        1.0
    };
    if !(b > 0.0 && b.is_finite()) {
        return Err(SuperError::NoAdmissible(format!("sup ψ = {sup_psi} leaves no positive b (got {b})")));
    }
    require_verified(build(
        Family::P1Exp,
        map(&[("b", b), ("epsilon", eps), ("C", shift)]),
        map(&[("K", k_bound)]),
        text(&[("psi", format!("x^2/2 - {:?}*x/2 + C", len))]),
        vgrid,
        Shape::P1Exp {
            c1: c1_series,
            gamma,
            psi,
        },
        cfg,
    )?)
}

/// `ū = a exp[∫_0^t c1] v(x,t)` for `p = 1 < l`, where `v` solves the heat
/// equation with flux `g = k1 exp[(l-1)∫_0^t c1]`.
pub fn construct_p1_bounded(
    spec: &ProblemSpec,
    grid: &Grid1D,
    cfg: &SuperConfig,
    v0: Option<CoefficientExpr>,
) -> Result<SupersolutionCandidate, SuperError> {
    cfg.validate()?;
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    if !(p == 1.0 && l > 1.0) {
        return Err(SuperError::Hypothesis(format!("need p = 1 < l, got p={p}, l={l}")));
    }
    let c1 = reduced(spec, grid, Reduction::C1);
    let k1 = reduced(spec, grid, Reduction::K1);
    let ig = weighted_integral(&*k1, &*c1, l - 1.0, cfg.integral_horizon)?;
    if !ig.is_finite() {
        return Err(SuperError::Hypothesis("∫_0^∞ k1 exp[(l-1)∫c1] dt diverges".into()));
    }
    let times = cfg.times();
    let horizon = cfg.t_end.max(cfg.window_horizon) + 1.0;
    let table = Arc::new(Primitive::build(&*c1, &times, 8, horizon, 1.0 / 16.0)?);
    let g: Arc<dyn TimeFunction> = Arc::new(WeightedFlux {
        k1: k1.clone(),
        c1: table.clone(),
        rate: l - 1.0,
    });
    let window = check_boundedness_criteria(&*g, cfg.window_t0, cfg.window_alpha, cfg.window_horizon)?;
    if !window.window_bounded {
        return Err(SuperError::Hypothesis("the window integral of k1 exp[(l-1)∫c1] is unbounded".into()));
    }
    let vgrid = Arc::new(VerificationGrid::new(spec, grid, &times)?);
    let v0 = match v0 {
        Some(e) => e,
        None => compatible_initial(grid.length(), g.at(0.0)?)?,
    };
    let v0_text = v0.source();
    let heat = Arc::new(solve_heat(grid, g, v0, &times, cfg)?);
    let c1_series = Arc::new(Series {
        values: times.iter().map(|&t| c1.at(t)).collect::<Result<_, _>>()?,
        primitive: times.iter().map(|&t| table.at(t)).collect(),
    });
    let sup_v = heat.sup;
    dyadic_search(l, sup_v, grid.length(), |a| {
        build(
            Family::P1Bounded,
            map(&[("a", a)]),
            map(&[
                ("V", sup_v),
                ("integral_g", ig.value),
                ("window_sup_g", window.window.value),
            ]),
            text(&[("v0", v0_text.clone()), ("g", "k1(t) exp[(l-1) ∫_0^t c1]".into())]),
            vgrid.clone(),
            Shape::P1Bounded {
                heat: heat.clone(),
                c1: c1_series.clone(),
            },
            cfg,
        )
    })
}

/// Options for [`construct_l1_pg1`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct L1Pg1Options {
    /// `k2` at `x = 0` and `x = L`; by default `sup_{y, t ≤ T} k(x_b, y, t)`.
    pub k2: Option<[f64; 2]>,
}

/// `ū = f(t) h(x)` for `l = 1 < p`, where `h'' = a h`, `∂h/∂ν = k2 ∫h`,
/// `a = k2(0) + k2(L)`, and
/// `f = e^{at}(A - (p-1) sup h^{p-1} ∫_0^t c1 e^{(p-1)aτ} dτ)^{-1/(p-1)}`.
pub fn construct_l1_pg1(
    spec: &ProblemSpec,
    grid: &Grid1D,
    cfg: &SuperConfig,
    opts: L1Pg1Options,
) -> Result<SupersolutionCandidate, SuperError> {
    cfg.validate()?;
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    if !(l == 1.0 && p > 1.0) {
        return Err(SuperError::Hypothesis(format!("need l = 1 < p, got p={p}, l={l}")));
    }
    let times = cfg.times();
    let observed = unweighted_kernel_sup(spec, grid, &times)?;
    let k2 = match opts.k2 {
        Some(k2) => {
            for b in 0..2 {
                if observed[b] > k2[b] * (1.0 + 1e-12) {
                    return Err(SuperError::Hypothesis(format!(
                        "k exceeds k2 at endpoint {b}: {} > {}",
                        observed[b], k2[b]
                    )));
                }
            }
            k2
        }
        None => observed,
    };
    let a = k2[0] + k2[1];
    if !(a > 0.0) {
        return Err(SuperError::Hypothesis("k2 must be positive at some endpoint".into()));
    }
    let c1 = reduced(spec, grid, Reduction::C1);
    let rate = FnTime(move |_| a);
    let total = weighted_integral(&*c1, &rate, p - 1.0, cfg.integral_horizon)?;
    if !total.is_finite() {
        return Err(SuperError::Hypothesis("∫_0^∞ c1(t) exp[(p-1) t ∫ k2 dS] dt diverges".into()));
    }
    let ell = solve_elliptic_nonlocal(k2[0], k2[1], grid)?;
    let h = ell.v.clone();
    let mass = grid.integrate(&h);
    let h_flux = [k2[0] * mass, k2[1] * mass];
    let h_xx = ghost_laplacian(grid.spacing(), &h, h_flux);
    let s = h.iter().map(|&v| power(v, p - 1.0)).fold(0.0, f64::max);
    let vgrid = Arc::new(VerificationGrid::new(spec, grid, &times)?);
    let c1_values = Arc::new(times.iter().map(|&t| c1.at(t)).collect::<Result<Vec<_>, _>>()?);
    require_verified(build(
        Family::L1Pg1,
        map(&[("a", a), ("S", s)]),
        map(&[
            ("k2_left", k2[0]),
            ("k2_right", k2[1]),
            ("integral_h", mass),
            ("normalization_residual", ell.normalization_residual()),
        ]),
        text(&[("h", "v'' = a v, ∂v/∂ν = k2 ∫v, ∫v = 1".into())]),
        vgrid,
        Shape::L1Pg1 {
            h: Arc::new(h),
            h_xx: Arc::new(h_xx),
            h_flux,
            c1,
            c1_values,
            p,
            horizon: cfg.integral_horizon,
        },
        cfg,
    )?)
}
