//! Problem definition: the interval, the exponents, the coefficient
//! expressions, and the scalar reductions of the coefficients that every
//! criterion consumes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{CoefficientExpr, EvalError, ParseError, TimeFunction, Var, VarSet};
use crate::quad;
use crate::report::CriterionReport;

/// Default number of equispaced samples for inf/sup over the interval.
pub const DEFAULT_SAMPLES: usize = 1001;

/// Time window over which nonnegativity of `c` and `k` is sampled.
pub const VALIDATION_HORIZON: f64 = 10.0;

const VALIDATION_X_SAMPLES: usize = 101;
const VALIDATION_T_SAMPLES: usize = 21;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("cannot parse `{field}`: {source}")]
    Parse {
        field: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("evaluation failed in `{field}`: {source}")]
    Eval {
        field: &'static str,
        #[source]
        source: EvalError,
    },
    #[error("malformed problem document: {0}")]
    Json(#[from] serde_json::Error),
}

/// The interval `(0, L)`. Its boundary is the two endpoints with outward
/// normals `-1` and `+1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain1D {
    length: f64,
}

impl Domain1D {
    pub fn new(length: f64) -> Result<Self, SpecError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(SpecError::Invalid(format!("domain length must be positive, got {length}")));
        }
        Ok(Domain1D { length })
    }

    pub fn unit() -> Self {
        Domain1D { length: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.length
    }

    /// `|∂Ω|` under the counting measure on the two endpoints.
    pub fn boundary_measure(&self) -> f64 {
        2.0
    }

    pub fn boundary(&self) -> [BoundaryPoint; 2] {
        [BoundaryPoint::Left, BoundaryPoint::Right]
    }

    pub fn coordinate(&self, b: BoundaryPoint) -> f64 {
        match b {
            BoundaryPoint::Left => 0.0,
            BoundaryPoint::Right => self.length,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Left,
    Right,
}

impl BoundaryPoint {
    /// Outward normal.
    pub fn normal(self) -> f64 {
        match self {
            BoundaryPoint::Left => -1.0,
            BoundaryPoint::Right => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub p: f64,
    pub l: f64,
}

impl ExponentPair {
    pub fn new(p: f64, l: f64) -> Result<Self, SpecError> {
        if !(p > 0.0 && l > 0.0 && p.is_finite() && l.is_finite()) {
            return Err(SpecError::Invalid(format!("exponents must be positive, got p={p}, l={l}")));
        }
        Ok(ExponentPair { p, l })
    }
}

/// Which branch of the case analysis an exponent pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// `max(p, l) ≤ 1`: every solution is global.
    SublinearAllGlobal,
    /// `min(p, l) > 1`.
    SuperlinearBoth,
    /// `p = 1`, `l > 1`.
    P1Lg1,
    /// `l = 1`, `p > 1`.
    L1Pg1,
    /// `p > 1 > l`.
    Pg1Only,
    /// `l > 1 > p`.
    Lg1Only,
}

pub fn classify_exponent_regime(e: ExponentPair) -> Regime {
    let (p, l) = (e.p, e.l);
    if p.max(l) <= 1.0 {
        Regime::SublinearAllGlobal
    } else if p.min(l) > 1.0 {
        Regime::SuperlinearBoth
    } else if p == 1.0 {
        Regime::P1Lg1
    } else if l == 1.0 {
        Regime::L1Pg1
    } else if p > 1.0 {
        Regime::Pg1Only
    } else {
        Regime::Lg1Only
    }
}

/// A full problem instance: `u_t = u_xx + c(x,t) u^p` on `(0, L)` with
/// outward flux `∂u/∂ν = ∫ k(x_b, y, t) u^l(y, t) dy` at each endpoint `x_b`
/// and initial datum `u0`.
///
/// In `k`, the variable `x` is the boundary point and `y` the integration
/// variable.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub domain: Domain1D,
    pub exponents: ExponentPair,
    pub c: CoefficientExpr,
    pub k: CoefficientExpr,
    pub u0: CoefficientExpr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExprField {
    Text(String),
    Number(f64),
}

impl ExprField {
    fn text(self) -> String {
        match self {
            ExprField::Text(s) => s,
            ExprField::Number(v) => format!("{v:?}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    #[serde(rename = "L")]
    length: f64,
    p: f64,
    l: f64,
    c: ExprField,
    k: ExprField,
    u0: ExprField,
}

impl ProblemSpec {
    /// Parses and validates a problem from expression strings.
    pub fn from_strings(length: f64, p: f64, l: f64, c: &str, k: &str, u0: &str) -> Result<Self, SpecError> {
        let parse = |field, text: &str, arity| {
            CoefficientExpr::parse(text, arity).map_err(|source| SpecError::Parse { field, source })
        };
        let spec = ProblemSpec {
            domain: Domain1D::new(length)?,
            exponents: ExponentPair::new(p, l)?,
            c: parse("c", c, VarSet::XT)?,
            k: parse("k", k, VarSet::XYT)?,
            u0: parse("u0", u0, VarSet::X)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let doc: ProblemDoc = serde_json::from_str(text)?;
        Self::from_strings(doc.length, doc.p, doc.l, &doc.c.text(), &doc.k.text(), &doc.u0.text())
    }

    pub fn to_json(&self) -> String {
        let doc = ProblemDoc {
            length: self.domain.length(),
            p: self.exponents.p,
            l: self.exponents.l,
            c: ExprField::Text(self.c.source()),
            k: ExprField::Text(self.k.source()),
            u0: ExprField::Text(self.u0.source()),
        };
        serde_json::to_string_pretty(&doc).expect("problem document serializes")
    }

    /// Samples `c ≥ 0`, `k ≥ 0` on `Ω × [0, VALIDATION_HORIZON]` and `u0 ≥ 0`.
    pub fn validate(&self) -> Result<(), SpecError> {
        let len = self.domain.length();
        let xs: Vec<f64> = (0..VALIDATION_X_SAMPLES)
            .map(|i| len * i as f64 / (VALIDATION_X_SAMPLES - 1) as f64)
            .collect();
        let ts: Vec<f64> = (0..VALIDATION_T_SAMPLES)
            .map(|i| VALIDATION_HORIZON * i as f64 / (VALIDATION_T_SAMPLES - 1) as f64)
            .collect();
        let negative = |field: &'static str, v: f64, at: String| {
            SpecError::Invalid(format!("{field} must be nonnegative, found {v} at {at}"))
        };
        for &x in &xs {
            let v = self.u0.eval_xyt(x, 0.0, 0.0).map_err(|source| SpecError::Eval { field: "u0", source })?;
            if v < 0.0 {
                return Err(negative("u0", v, format!("x={x}")));
            }
            for &t in &ts {
                let v = self.c.eval_xyt(x, 0.0, t).map_err(|source| SpecError::Eval { field: "c", source })?;
                if v < 0.0 {
                    return Err(negative("c", v, format!("x={x}, t={t}")));
                }
                for xb in [0.0, len] {
                    let v = self.k.eval_xyt(xb, x, t).map_err(|source| SpecError::Eval { field: "k", source })?;
                    if v < 0.0 {
                        return Err(negative("k", v, format!("x={xb}, y={x}, t={t}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        classify_exponent_regime(self.exponents)
    }

    pub fn with_exponents(&self, p: f64, l: f64) -> Result<Self, SpecError> {
        Ok(ProblemSpec {
            exponents: ExponentPair::new(p, l)?,
            ..self.clone()
        })
    }

    pub fn with_initial(&self, u0: CoefficientExpr) -> Self {
        ProblemSpec { u0, ..self.clone() }
    }

    /// `∫_Ω u0`, by Simpson's rule.
    pub fn initial_mass(&self, n_samples: usize) -> Result<f64, EvalError> {
        quad::simpson(|x| self.u0.eval_xyt(x, 0.0, 0.0), 0.0, self.domain.length(), n_samples.max(2) - 1)
    }

    pub fn sup_initial(&self, n_samples: usize) -> Result<f64, EvalError> {
        let len = self.domain.length();
        let n = n_samples.max(2);
        let mut sup: f64 = 0.0;
        for i in 0..n {
            sup = sup.max(self.u0.eval_xyt(len * i as f64 / (n - 1) as f64, 0.0, 0.0)?);
        }
        Ok(sup)
    }
}

/// The six scalar reductions at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduced {
    /// `|Ω|^{1-p} inf_x c(x,t)`.
    pub c0: f64,
    /// `|Ω|^{1-l} inf_y Σ_{x_b} k(x_b,y,t)`.
    pub k0: f64,
    /// `∫_Ω c(x,t) dx`.
    pub cbar: f64,
    /// `Σ_{x_b} ∫_Ω k(x_b,y,t) dy`.
    pub kbar: f64,
    /// `sup_x c(x,t)`.
    pub c1: f64,
    /// `sup_{x_b,y} k(x_b,y,t)`.
    pub k1: f64,
}

/// Computes all six reductions at time `t` over `n_samples` equispaced
/// nodes (trapezoid rule for the integrals). Expressions that do not depend
/// on the space variable are evaluated once.
pub fn reduce_coefficients(spec: &ProblemSpec, t: f64, n_samples: usize) -> Result<Reduced, EvalError> {
    let n = n_samples.max(3);
    let len = spec.domain.length();
    let omega = spec.domain.measure();
    let ExponentPair { p, l } = spec.exponents;
    let h = len / (n - 1) as f64;
    let w = quad::trapezoid_weights(n, h);

    let (c_inf, c_sup, c_int) = if spec.c.depends_on(Var::X) {
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        let mut int = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let v = spec.c.eval_xyt(i as f64 * h, 0.0, t)?;
            inf = inf.min(v);
            sup = sup.max(v);
            int += wi * v;
        }
        (inf, sup, int)
    } else {
        let v = spec.c.eval_xyt(0.0, 0.0, t)?;
        (v, v, v * len)
    };

    let (k0_inf, k_sup, k_int) = if spec.k.depends_on(Var::Y) {
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        let mut int = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let y = i as f64 * h;
            let a = spec.k.eval_xyt(0.0, y, t)?;
            let b = spec.k.eval_xyt(len, y, t)?;
            inf = inf.min(a + b);
            sup = sup.max(a.max(b));
            int += wi * (a + b);
        }
        (inf, sup, int)
    } else {
        let a = spec.k.eval_xyt(0.0, 0.0, t)?;
        let b = spec.k.eval_xyt(len, 0.0, t)?;
        (a + b, a.max(b), (a + b) * len)
    };

    Ok(Reduced {
        c0: omega.powf(1.0 - p) * c_inf,
        k0: omega.powf(1.0 - l) * k0_inf,
        cbar: c_int,
        kbar: k_int,
        c1: c_sup,
        k1: k_sup,
    })
}

/// Names one of the six reductions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    C0,
    K0,
    Cbar,
    Kbar,
    C1,
    K1,
}

/// The reductions as functions of time, each backed by spatial sampling.
#[derive(Clone, Debug)]
pub struct ReducedCoefficients {
    spec: Arc<ProblemSpec>,
    n_samples: usize,
}

impl ReducedCoefficients {
    pub fn new(spec: &ProblemSpec, n_samples: usize) -> Self {
        ReducedCoefficients {
            spec: Arc::new(spec.clone()),
            n_samples,
        }
    }

    pub fn at(&self, t: f64) -> Result<Reduced, EvalError> {
        reduce_coefficients(&self.spec, t, self.n_samples)
    }

    pub fn function(&self, which: Reduction) -> ReducedFn {
        ReducedFn {
            inner: self.clone(),
            which,
        }
    }
}

/// One reduction as a [`TimeFunction`].
#[derive(Clone, Debug)]
pub struct ReducedFn {
    inner: ReducedCoefficients,
    which: Reduction,
}

impl TimeFunction for ReducedFn {
    fn at(&self, t: f64) -> Result<f64, EvalError> {
        let r = self.inner.at(t)?;
        Ok(match self.which {
            Reduction::C0 => r.c0,
            Reduction::K0 => r.k0,
            Reduction::Cbar => r.cbar,
            Reduction::Kbar => r.kbar,
            Reduction::C1 => r.c1,
            Reduction::K1 => r.k1,
        })
    }
}

/// Default tolerance for the compatibility check when the normal
/// derivative of `u0` is obtained symbolically.
pub const COMPAT_TOL_ANALYTIC: f64 = 1e-8;
/// Default tolerance when it has to be differenced.
pub const COMPAT_TOL_DIFFERENCED: f64 = 1e-4;

/// Checks `∂u0/∂ν = ∫ k(x_b, y, 0) u0^l(y) dy` at both endpoints.
///
/// With `tol = None` the default for the derivative method in use applies.
pub fn check_compatibility(spec: &ProblemSpec, tol: Option<f64>) -> Result<CriterionReport, SpecError> {
    let len = spec.domain.length();
    let l = spec.exponents.l;
    let eval_u0 = |x: f64| spec.u0.eval_xyt(x, 0.0, 0.0).map_err(|source| SpecError::Eval { field: "u0", source });

    let derivative = spec.u0.differentiate(Var::X).ok();
    let analytic = derivative.is_some();
    let slope = |b: BoundaryPoint| -> Result<f64, SpecError> {
        let x = spec.domain.coordinate(b);
        if let Some(d) = &derivative {
            return d.eval_xyt(x, 0.0, 0.0).map_err(|source| SpecError::Eval { field: "u0", source });
        }
        // one-sided second-order difference into the interval
        let delta = 1e-4 * len;
        let s = -b.normal();
        let (f0, f1, f2) = (eval_u0(x)?, eval_u0(x + s * delta)?, eval_u0(x + 2.0 * s * delta)?);
        Ok(s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * delta))
    };

    let panels = DEFAULT_SAMPLES - 1;
    let mut residuals = [0.0; 2];
    for (slot, b) in spec.domain.boundary().into_iter().enumerate() {
        let xb = spec.domain.coordinate(b);
        let flux = b.normal() * slope(b)?;
        let integral = quad::simpson(
            |y| -> Result<f64, SpecError> {
                let u = eval_u0(y)?;
                if u < 0.0 {
                    return Err(SpecError::Invalid(format!("u0 is negative ({u}) at x={y}")));
                }
                let k = spec.k.eval_xyt(xb, y, 0.0).map_err(|source| SpecError::Eval { field: "k", source })?;
                Ok(k * u.powf(l))
            },
            0.0,
            len,
            panels,
        )?;
        residuals[slot] = flux - integral;
    }
    let tol = tol.unwrap_or(if analytic { COMPAT_TOL_ANALYTIC } else { COMPAT_TOL_DIFFERENCED });
    let passed = residuals.iter().all(|r| r.abs() <= tol);
    Ok(CriterionReport::new("compatibility", passed, if passed { "Compatible" } else { "Incompatible" })
        .with("residual_left", residuals[0])
        .with("residual_right", residuals[1])
        .with("tolerance", tol)
        .with("analytic_derivative", if analytic { 1.0 } else { 0.0 }))
}
