use serde::{Deserialize, Serialize};

use super::SuperError;
use crate::domain::ProblemSpec;
use crate::expr::{CoefficientExpr, DiffError, Var, VarSet};
use crate::pde::{power, Grid1D};
use crate::report::CriterionReport;

/// Nodal values of a candidate and the derivatives entering the
/// supersolution inequalities, at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSample {
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub u_xx: Vec<f64>,
    /// Outward normal derivative at `x = 0` and `x = L`.
    pub flux: [f64; 2],
}

/// Anything that can be sampled on a grid as a candidate supersolution.
pub trait Profile {
    fn sample(&self, grid: &Grid1D, t: f64) -> Result<ProfileSample, SuperError>;
}

/// Smallest residual of one kind, where it occurred, and its value relative
/// to `max(1, size of the largest term)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualMin {
    pub value: f64,
    pub scaled: f64,
    pub x: f64,
    pub t: f64,
}

impl ResidualMin {
    fn new() -> Self {
        ResidualMin {
            value: f64::INFINITY,
            scaled: f64::INFINITY,
            x: 0.0,
            t: 0.0,
        }
    }

    fn push(&mut self, r: f64, scale: f64, x: f64, t: f64) {
        let s = r / scale.max(1.0);
        if s < self.scaled {
            self.scaled = s;
            self.x = x;
            self.t = t;
        }
        self.value = self.value.min(r);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `min (ū_t - ū_xx - c ū^p)` over nodes and times.
    pub interior: ResidualMin,
    /// `min (∂ū/∂ν - ∫ k ū^l)` over both endpoints and times.
    pub boundary: ResidualMin,
    /// `min (ū(·,0) - u0)` over nodes.
    pub initial: ResidualMin,
    pub tol: f64,
    pub passed: bool,
}

impl VerificationReport {
    pub fn r_int(&self) -> f64 {
        self.interior.value
    }

    pub fn r_bnd(&self) -> f64 {
        self.boundary.value
    }

    pub fn r_init(&self) -> f64 {
        self.initial.value
    }

    pub fn to_report(&self) -> CriterionReport {
        CriterionReport::new("supersolution", self.passed, if self.passed { "pass" } else { "fail" })
            .with("r_int", self.interior.value)
            .with("r_bnd", self.boundary.value)
            .with("r_init", self.initial.value)
            .with("r_int_scaled", self.interior.scaled)
            .with("r_bnd_scaled", self.boundary.scaled)
            .with("r_init_scaled", self.initial.scaled)
            .with("tol", self.tol)
    }
}

/// `n` equispaced times on `[0, t_end]`.
pub fn time_grid(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let mut ts: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
    ts[n - 1] = t_end;
    ts
}

/// Coefficients and initial datum sampled once on a space-time grid, so
/// that many candidates can be checked against the same problem cheaply.
#[derive(Clone, Debug)]
pub struct VerificationGrid {
    grid: Grid1D,
    times: Vec<f64>,
    p: f64,
    l: f64,
    c: Vec<Vec<f64>>,
    /// Quadrature-weighted `w_j k(x_b, y_j, t)` for both endpoints.
    k: Vec<[Vec<f64>; 2]>,
    u0: Vec<f64>,
}

impl VerificationGrid {
    pub fn new(spec: &ProblemSpec, grid: &Grid1D, times: &[f64]) -> Result<Self, SuperError> {
        if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SuperError::Invalid("verification times must increase from 0".into()));
        }
        let len = grid.length();
        let nodes = grid.nodes();
        let mut c = Vec::with_capacity(times.len());
        let mut k = Vec::with_capacity(times.len());
        for &t in times {
            c.push(nodes.iter().map(|&x| spec.c.eval_xyt(x, 0.0, t)).collect::<Result<Vec<_>, _>>()?);
            let side = |xb: f64| {
                nodes
                    .iter()
                    .zip(grid.weights())
                    .map(|(&y, &w)| Ok(w * spec.k.eval_xyt(xb, y, t)?))
                    .collect::<Result<Vec<f64>, SuperError>>()
            };
            k.push([side(0.0)?, side(len)?]);
        }
        let u0 = nodes.iter().map(|&x| spec.u0.eval_xyt(x, 0.0, 0.0)).collect::<Result<Vec<_>, _>>()?;
        Ok(VerificationGrid {
            grid: grid.clone(),
            times: times.to_vec(),
            p: spec.exponents.p,
            l: spec.exponents.l,
            c,
            k,
            u0,
        })
    }

    /// Weighted kernel row `w_j k(x_b, y_j, t_i)` for endpoint `b`.
    pub fn kernel_row(&self, time_index: usize, b: usize) -> &[f64] {
        &self.k[time_index][b]
    }

    /// `c(x_j, t_i)`.
    pub fn reaction_row(&self, time_index: usize) -> &[f64] {
        &self.c[time_index]
    }

    pub fn exponents(&self) -> (f64, f64) {
        (self.p, self.l)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn initial(&self) -> &[f64] {
        &self.u0
    }

    pub fn check(&self, profile: &dyn Profile, tol: f64) -> Result<VerificationReport, SuperError> {
        self.check_against(profile, &self.u0, tol)
    }

    /// As [`check`](Self::check), with `u0` in place of the stored datum.
    pub fn check_against(&self, profile: &dyn Profile, u0: &[f64], tol: f64) -> Result<VerificationReport, SuperError> {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        if u0.len() != n {
            return Err(SuperError::Invalid("initial datum does not match the grid".into()));
        }
        let mut interior = ResidualMin::new();
        let mut boundary = ResidualMin::new();
        let mut initial = ResidualMin::new();
        for (ti, &t) in self.times.iter().enumerate() {
            let s = profile.sample(&self.grid, t)?;
            if s.u.len() != n || s.u_t.len() != n || s.u_xx.len() != n {
                return Err(SuperError::Invalid("profile sample does not match the grid".into()));
            }
            for i in 0..n {
                let react = self.c[ti][i] * power(s.u[i].max(0.0), self.p);
                let r = s.u_t[i] - s.u_xx[i] - react;
                let scale = s.u_t[i].abs().max(s.u_xx[i].abs()).max(react.abs());
                interior.push(r, scale, nodes[i], t);
            }
            for (b, xb) in [(0, nodes[0]), (1, nodes[n - 1])] {
                let integral: f64 = self.k[ti][b].iter().zip(&s.u).map(|(w, &u)| w * power(u.max(0.0), self.l)).sum();
                let r = s.flux[b] - integral;
                boundary.push(r, s.flux[b].abs().max(integral.abs()), xb, t);
            }
            if ti == 0 {
                for i in 0..n {
                    let r = s.u[i] - u0[i];
                    initial.push(r, s.u[i].abs().max(u0[i].abs()), nodes[i], 0.0);
                }
            }
        }
        for m in [&interior, &boundary, &initial] {
            if !(m.value.is_finite() && m.scaled.is_finite()) {
                return Err(SuperError::NonFinite(format!("residual {} at x={}, t={}", m.value, m.x, m.t)));
            }
        }
        let passed = interior.scaled >= -tol && boundary.scaled >= -tol && initial.scaled >= -tol;
        Ok(VerificationReport {
            interior,
            boundary,
            initial,
            tol,
            passed,
        })
    }
}

/// Checks the three supersolution inequalities for `profile` against
/// `spec` on `grid × times`.
pub fn verify_supersolution(
    profile: &dyn Profile,
    spec: &ProblemSpec,
    grid: &Grid1D,
    times: &[f64],
    tol: f64,
) -> Result<VerificationReport, SuperError> {
    VerificationGrid::new(spec, grid, times)?.check(profile, tol)
}

/// Second derivative in `x` when the expression has no symbolic one.
enum Curvature {
    Symbolic(CoefficientExpr),
    Differenced,
}

/// A closed-form candidate `ū(x, t)` given as an expression.
pub struct ExprCandidate {
    u: CoefficientExpr,
    u_t: CoefficientExpr,
    u_x: Option<CoefficientExpr>,
    u_xx: Curvature,
}

const FD_STEP: f64 = 1e-3;
const RICHARDSON_TOL: f64 = 1e-6;

impl ExprCandidate {
    pub fn parse(text: &str) -> Result<Self, SuperError> {
        let u = CoefficientExpr::parse(text, VarSet::XT)?;
        Self::new(u)
    }

    pub fn new(u: CoefficientExpr) -> Result<Self, SuperError> {
        if !u.used_vars().is_subset_of(VarSet::XT) {
            return Err(SuperError::Invalid("candidate may depend on x and t only".into()));
        }
        let nondiff = |e: DiffError| SuperError::NotDifferentiable(e.to_string());
        let u_t = u.differentiate(Var::T).map_err(nondiff)?;
        let (u_x, u_xx) = match u.differentiate(Var::X) {
            Ok(d1) => match d1.differentiate(Var::X) {
                Ok(d2) => (Some(d1), Curvature::Symbolic(d2)),
                Err(_) => (Some(d1), Curvature::Differenced),
            },
            Err(_) => (None, Curvature::Differenced),
        };
        Ok(ExprCandidate { u, u_t, u_x, u_xx })
    }

    fn value(&self, x: f64, t: f64) -> Result<f64, SuperError> {
        Ok(self.u.eval_xyt(x, 0.0, t)?)
    }

    /// Five-point second difference at step `d`, one-sided near the ends.
    fn second_difference(&self, x: f64, t: f64, d: f64, len: f64) -> Result<f64, SuperError> {
        let f = |y: f64| self.value(y, t);
        if x - 2.0 * d >= 0.0 && x + 2.0 * d <= len {
            Ok((-f(x - 2.0 * d)? + 16.0 * f(x - d)? - 30.0 * f(x)? + 16.0 * f(x + d)? - f(x + 2.0 * d)?) / (12.0 * d * d))
        } else {
            let s = if x - 2.0 * d < 0.0 { 1.0 } else { -1.0 };
            let g = |k: f64| f(x + s * k * d);
            Ok((35.0 * g(0.0)? - 104.0 * g(1.0)? + 114.0 * g(2.0)? - 56.0 * g(3.0)? + 11.0 * g(4.0)?) / (12.0 * d * d))
        }
    }

    fn slope(&self, x: f64, t: f64, len: f64) -> Result<f64, SuperError> {
        if let Some(d) = &self.u_x {
            return Ok(d.eval_xyt(x, 0.0, t)?);
        }
        let d = FD_STEP * len;
        let s = if x < 0.5 * len { 1.0 } else { -1.0 };
        let f = |k: f64| self.value(x + s * k * d, t);
        Ok(s * (-25.0 * f(0.0)? + 48.0 * f(1.0)? - 36.0 * f(2.0)? + 16.0 * f(3.0)? - 3.0 * f(4.0)?) / (12.0 * d))
    }
}

impl Profile for ExprCandidate {
    fn sample(&self, grid: &Grid1D, t: f64) -> Result<ProfileSample, SuperError> {
        let len = grid.length();
        let nodes = grid.nodes();
        let mut u = Vec::with_capacity(nodes.len());
        let mut u_t = Vec::with_capacity(nodes.len());
        let mut u_xx = Vec::with_capacity(nodes.len());
        for &x in nodes {
            u.push(self.value(x, t)?);
            u_t.push(self.u_t.eval_xyt(x, 0.0, t)?);
            u_xx.push(match &self.u_xx {
                Curvature::Symbolic(e) => e.eval_xyt(x, 0.0, t)?,
                Curvature::Differenced => {
                    let d = FD_STEP * len;
                    let coarse = self.second_difference(x, t, d, len)?;
                    let fine = self.second_difference(x, t, 0.5 * d, len)?;
                    if (coarse - fine).abs() > RICHARDSON_TOL * fine.abs().max(1.0) {
                        return Err(SuperError::NotDifferentiable(format!(
                            "second differences disagree at x={x}, t={t}: {coarse} vs {fine}"
                        )));
                    }
                    fine
                }
            });
        }
        let flux = [-self.slope(0.0, t, len)?, self.slope(len, t, len)?];
        Ok(ProfileSample { u, u_t, u_xx, flux })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain1D;

    fn setup(c: &str, p: f64, k: &str, u0: &str) -> (ProblemSpec, Grid1D, Vec<f64>) {
        let spec = ProblemSpec::from_strings(1.0, p, 1.0, c, k, u0).unwrap();
        (spec, Grid1D::new(Domain1D::unit(), 51).unwrap(), time_grid(1.0, 51))
    }

    #[test]
    fn constant_one_is_a_supersolution() {
        let (spec, grid, ts) = setup("0", 1.0, "0", "1 - x*(1-x)");
        let r = verify_supersolution(&ExprCandidate::parse("1").unwrap(), &spec, &grid, &ts, 1e-8).unwrap();
        assert!(r.passed);
        assert_eq!(r.r_int(), 0.0);
        assert_eq!(r.r_bnd(), 0.0);
        assert!(r.r_init() >= 0.0);
    }

    #[test]
    fn exact_exponential_passes() {
        let (spec, grid, ts) = setup("1", 1.0, "0", "1");
        let r = verify_supersolution(&ExprCandidate::parse("exp(t)").unwrap(), &spec, &grid, &ts, 1e-8).unwrap();
        assert!(r.passed);
        assert!(r.r_int().abs() < 1e-12);
    }

    #[test]
    fn slow_exponential_fails() {
        let (spec, grid, ts) = setup("1", 1.0, "0", "1");
        let r = verify_supersolution(&ExprCandidate::parse("exp(t/2)").unwrap(), &spec, &grid, &ts, 1e-8).unwrap();
        assert!(!r.passed);
        let expected = -(0.5f64).exp() / 2.0;
        assert!((r.r_int() - expected).abs() < 1e-12, "{}", r.r_int());
        assert!((r.interior.scaled + 0.5).abs() < 1e-12);
    }

    #[test]
    fn flux_uses_outward_normal() {
        let (spec, grid, ts) = setup("0", 1.0, "1", "0");
        // ū = 1 + x² - x has outward slope 1 at both ends and ∫ū = 5/6.
        let cand = ExprCandidate::parse("2 + x^2 - x + 2*t").unwrap();
        let s = cand.sample(&grid, 0.0).unwrap();
        assert!((s.flux[0] - 1.0).abs() < 1e-14 && (s.flux[1] - 1.0).abs() < 1e-14);
        let r = verify_supersolution(&cand, &spec, &grid, &ts, 1e-8).unwrap();
        assert!(!r.passed);
        assert!(r.r_bnd() < -0.5);
    }

    #[test]
    fn differenced_curvature_matches_symbolic() {
        let grid = Grid1D::new(Domain1D::unit(), 21).unwrap();
        let smooth = ExprCandidate::parse("exp(t) * cos(x)").unwrap();
        let s = smooth.sample(&grid, 0.3).unwrap();
        let mut fd = ExprCandidate::parse("exp(t) * cos(x)").unwrap();
        fd.u_xx = Curvature::Differenced;
        fd.u_x = None;
        let d = fd.sample(&grid, 0.3).unwrap();
        for (a, b) in s.u_xx.iter().zip(&d.u_xx) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        for (a, b) in s.flux.iter().zip(&d.flux) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}
