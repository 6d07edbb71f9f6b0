//! Scalar comparison problems for the mass `w(t) = ∫u`, the blow-up
//! thresholds on `w(0)`, and the criterion for blow-up of every nontrivial
//! solution.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, TimeFunction};
use crate::quad::{self, Cumulative, DoublingRule, ImproperIntegral, TailStatus};
use crate::report::CriterionReport;
use crate::rk::{self, DORMAND_PRINCE};

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("{0}")]
    Exponents(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("coefficient evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeKind {
    /// `w' = c0 w^p`, `p > 1`.
    #[serde(rename = "C0_P")]
    C0P,
    /// `w' = k0 w^l`, `l > 1`.
    #[serde(rename = "K0_L")]
    K0L,
    /// `w' = c0 w^p + k0 w^l`, `p, l ≥ 1`.
    #[serde(rename = "SUM")]
    Sum,
}

#[derive(Clone)]
pub struct ComparisonODE {
    pub kind: OdeKind,
    pub p: f64,
    pub l: f64,
    pub c0: Arc<dyn TimeFunction>,
    pub k0: Arc<dyn TimeFunction>,
    pub w0: f64,
}

impl ComparisonODE {
    pub fn new(
        kind: OdeKind,
        p: f64,
        l: f64,
        c0: Arc<dyn TimeFunction>,
        k0: Arc<dyn TimeFunction>,
        w0: f64,
    ) -> Result<Self, OdeError> {
        if !(w0 >= 0.0 && w0.is_finite()) {
            return Err(OdeError::Invalid(format!("w0 must be finite and nonnegative, got {w0}")));
        }
        let ok = match kind {
            OdeKind::C0P => p > 1.0,
            OdeKind::K0L => l > 1.0,
            OdeKind::Sum => p >= 1.0 && l >= 1.0,
        };
        if !ok {
            return Err(OdeError::Exponents(format!("exponents p={p}, l={l} do not fit {kind:?}")));
        }
        Ok(ComparisonODE { kind, p, l, c0, k0, w0 })
    }

    pub fn rhs(&self, t: f64, w: f64) -> Result<f64, EvalError> {
        let w = w.max(0.0);
        Ok(match self.kind {
            OdeKind::C0P => self.c0.at(t)? * w.powf(self.p),
            OdeKind::K0L => self.k0.at(t)? * w.powf(self.l),
            OdeKind::Sum => self.c0.at(t)? * w.powf(self.p) + self.k0.at(t)? * w.powf(self.l),
        })
    }

    /// Exponent governing growth at large `w`.
    pub fn leading_exponent(&self) -> f64 {
        match self.kind {
            OdeKind::C0P => self.p,
            OdeKind::K0L => self.l,
            OdeKind::Sum => self.p.max(self.l),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    /// Value of `w` treated as blow-up; the remaining time is then added
    /// from the local power law.
    pub w_max: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            rtol: 1e-12,
            atol: 1e-14,
            h_init: 1e-6,
            h_min: 1e-15,
            w_max: 1e10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeSolution {
    /// Accepted `(t, w)` pairs, starting at `(0, w0)`.
    pub points: Vec<(f64, f64)>,
    pub blowup_time: Option<f64>,
    pub t_stop: f64,
}

/// `w0^{1-q} / ((q-1) coeff)`, the blow-up time of `w' = coeff w^q`.
pub fn closed_form_blowup_time(q: f64, coeff: f64, w0: f64) -> f64 {
    w0.powf(1.0 - q) / ((q - 1.0) * coeff)
}

pub fn solve_comparison_ode(ode: &ComparisonODE, t_end: f64) -> Result<OdeSolution, OdeError> {
    solve_comparison_ode_with(ode, t_end, &OdeConfig::default())
}

pub fn solve_comparison_ode_with(ode: &ComparisonODE, t_end: f64, cfg: &OdeConfig) -> Result<OdeSolution, OdeError> {
    if !(t_end > 0.0) {
        return Err(OdeError::Invalid(format!("t_end must be positive, got {t_end}")));
    }
    let q = ode.leading_exponent();
    let mut f = |t: f64, y: &[f64], out: &mut [f64]| -> Result<(), EvalError> {
        out[0] = ode.rhs(t, y[0])?;
        Ok(())
    };
    let mut t = 0.0;
    let mut y = vec![ode.w0];
    let mut f0 = vec![ode.rhs(0.0, ode.w0)?];
    let mut points = vec![(0.0, ode.w0)];
    let mut h = cfg.h_init;
    let tail = |t: f64, w: f64, dw: f64| if q > 1.0 && dw > 0.0 { t + w / ((q - 1.0) * dw) } else { t };

    while t < t_end {
        let step = h.min(t_end - t);
        let trial = rk::try_step(&DORMAND_PRINCE, &mut f, t, &y, &f0, step, cfg.rtol, cfg.atol)?;
        let accepted = match trial {
            Some(tr) if tr.err <= 1.0 => tr,
            Some(tr) => {
                h = rk::next_step(step, tr.err, DORMAND_PRINCE.error_order);
                if h < cfg.h_min {
                    return Ok(OdeSolution {
                        blowup_time: Some(tail(t, y[0], f0[0])),
                        points,
                        t_stop: t,
                    });
                }
                continue;
            }
            None => {
                h = 0.5 * step;
                if h < cfg.h_min {
                    return Ok(OdeSolution {
                        blowup_time: Some(tail(t, y[0], f0[0])),
                        points,
                        t_stop: t,
                    });
                }
                continue;
            }
        };
        t = if step == t_end - t { t_end } else { t + step };
        y = accepted.y;
        f0 = accepted.f_new;
        points.push((t, y[0]));
        if y[0] > cfg.w_max {
            return Ok(OdeSolution {
                blowup_time: Some(tail(t, y[0], f0[0])),
                points,
                t_stop: t,
            });
        }
        h = rk::next_step(step, accepted.err, DORMAND_PRINCE.error_order);
    }
    Ok(OdeSolution {
        points,
        blowup_time: None,
        t_stop: t,
    })
}

/// The five threshold cases for the initial mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdCase {
    /// `((p-1)∫c0)^{-1/(p-1)}`, `p > 1`.
    #[serde(rename = "P_GT_1")]
    P,
    /// `((l-1)∫k0)^{-1/(l-1)}`, `l > 1`.
    #[serde(rename = "L_GT_1")]
    L,
    /// `((l-1)∫k0 exp[(l-1)∫_0^t c0])^{-1/(l-1)}`, `p = 1 < l`.
    #[serde(rename = "P_EQ_1_L_GT_1")]
    P1L,
    /// `((p-1)∫c0 exp[(p-1)∫_0^t k0])^{-1/(p-1)}`, `l = 1 < p`.
    #[serde(rename = "L_EQ_1_P_GT_1")]
    L1P,
    /// Minimum of the `P` and `L` thresholds, `p, l > 1`.
    #[serde(rename = "MIN")]
    Min,
}

impl ThresholdCase {
    pub fn applies(self, p: f64, l: f64) -> bool {
        match self {
            ThresholdCase::P => p > 1.0,
            ThresholdCase::L => l > 1.0,
            ThresholdCase::P1L => p == 1.0 && l > 1.0,
            ThresholdCase::L1P => l == 1.0 && p > 1.0,
            ThresholdCase::Min => p > 1.0 && l > 1.0,
        }
    }

    pub fn all() -> [ThresholdCase; 5] {
        [ThresholdCase::P, ThresholdCase::L, ThresholdCase::P1L, ThresholdCase::L1P, ThresholdCase::Min]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdVerdict {
    BlowsUp,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub case: ThresholdCase,
    /// `0` when the defining integral diverges, `+∞` when it vanishes.
    pub threshold: f64,
    pub w0: f64,
    pub verdict: ThresholdVerdict,
    pub integrals: BTreeMap<String, ImproperIntegral>,
}

/// An integrand that overflows counts as divergent rather than as an
/// evaluation failure.
fn improper_of(
    mut f: impl FnMut(f64) -> Result<f64, EvalError>,
    breaks: &dyn TimeFunction,
    a: f64,
    horizon: f64,
    rule: DoublingRule,
) -> Result<ImproperIntegral, EvalError> {
    let g = |t| match f(t) {
        Err(EvalError::NonFinite) => Ok(f64::INFINITY),
        other => other,
    };
    quad::improper(g, |lo, hi| breaks.breakpoints(lo, hi), a, horizon, rule)
}

/// `∫_0^∞ f`.
pub fn integral_to_infinity(f: &dyn TimeFunction, horizon: f64) -> Result<ImproperIntegral, EvalError> {
    improper_of(|t| f.at(t), f, 0.0, horizon, DoublingRule::default())
}

/// `∫_0^∞ f(t) exp[r ∫_0^t g]`.
pub fn weighted_integral(
    f: &dyn TimeFunction,
    g: &dyn TimeFunction,
    rate: f64,
    horizon: f64,
) -> Result<ImproperIntegral, EvalError> {
    let mut inner = Cumulative::new(|s| g.at(s));
    improper_of(
        |t| {
            let v = f.at(t)?;
            if v == 0.0 {
                return Ok(0.0);
            }
            Ok(v * (rate * inner.at(t)?).exp())
        },
        f,
        0.0,
        horizon,
        DoublingRule::default(),
    )
}

fn threshold_from(q: f64, integral: &ImproperIntegral) -> f64 {
    if !integral.is_finite() {
        0.0
    } else if integral.value <= 0.0 {
        f64::INFINITY
    } else {
        ((q - 1.0) * integral.value).powf(-1.0 / (q - 1.0))
    }
}

/// Threshold on `w0 = ∫u0` above which the comparison problem, and hence
/// the PDE, has no global solution.
pub fn blowup_threshold(
    case: ThresholdCase,
    p: f64,
    l: f64,
    c0: &dyn TimeFunction,
    k0: &dyn TimeFunction,
    horizon: f64,
    w0: f64,
) -> Result<ThresholdReport, OdeError> {
    if !case.applies(p, l) {
        return Err(OdeError::Exponents(format!("case {case:?} does not apply to p={p}, l={l}")));
    }
    if !(horizon > 0.0) {
        return Err(OdeError::Invalid(format!("horizon must be positive, got {horizon}")));
    }
    let mut integrals = BTreeMap::new();
    let threshold = match case {
        ThresholdCase::P => {
            let i = integral_to_infinity(c0, horizon)?;
            integrals.insert("c0".to_string(), i);
            threshold_from(p, &i)
        }
        ThresholdCase::L => {
            let i = integral_to_infinity(k0, horizon)?;
            integrals.insert("k0".to_string(), i);
            threshold_from(l, &i)
        }
        ThresholdCase::P1L => {
            let i = weighted_integral(k0, c0, l - 1.0, horizon)?;
            integrals.insert("k0_weighted".to_string(), i);
            threshold_from(l, &i)
        }
        ThresholdCase::L1P => {
            let i = weighted_integral(c0, k0, p - 1.0, horizon)?;
            integrals.insert("c0_weighted".to_string(), i);
            threshold_from(p, &i)
        }
        ThresholdCase::Min => {
            let ic = integral_to_infinity(c0, horizon)?;
            let ik = integral_to_infinity(k0, horizon)?;
            integrals.insert("c0".to_string(), ic);
            integrals.insert("k0".to_string(), ik);
            threshold_from(p, &ic).min(threshold_from(l, &ik))
        }
    };
    let verdict = if w0 > threshold {
        ThresholdVerdict::BlowsUp
    } else {
        ThresholdVerdict::Inconclusive
    };
    Ok(ThresholdReport {
        case,
        threshold,
        w0,
        verdict,
        integrals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitClass {
    Diverges,
    ConvergesOrBounded,
    Undetermined,
    /// The decay integral itself diverges, so the threshold remark already
    /// covers the case.
    NotApplicable,
}

impl LimitClass {
    fn rank(self) -> u8 {
        match self {
            LimitClass::Diverges => 3,
            LimitClass::Undetermined => 2,
            LimitClass::ConvergesOrBounded => 1,
            LimitClass::NotApplicable => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LimitClass::Diverges => "Diverges",
            LimitClass::ConvergesOrBounded => "ConvergesOrBounded",
            LimitClass::Undetermined => "Undetermined",
            LimitClass::NotApplicable => "NotApplicable",
        }
    }
}

const GROWTH: f64 = 1.05;
const DECAY: f64 = 0.95;

/// Classifies a sampled sequence by its last three successive ratios.
pub fn classify_limit(samples: &[f64]) -> LimitClass {
    if samples.iter().any(|v| !v.is_finite()) {
        return LimitClass::Diverges;
    }
    if samples.len() < 4 {
        return LimitClass::Undetermined;
    }
    let tail = &samples[samples.len() - 4..];
    if tail.iter().all(|&v| v == 0.0) {
        return LimitClass::ConvergesOrBounded;
    }
    let ratios: Vec<f64> = tail
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
        .collect();
    if ratios.iter().all(|&r| r >= GROWTH) {
        LimitClass::Diverges
    } else if ratios.iter().all(|&r| r <= DECAY) {
        LimitClass::ConvergesOrBounded
    } else {
        LimitClass::Undetermined
    }
}

struct Branch {
    class: LimitClass,
    integral: ImproperIntegral,
    samples: Vec<(f64, f64)>,
}

fn limit_branch(
    q: f64,
    decay: &dyn TimeFunction,
    growth: &dyn TimeFunction,
    horizon: f64,
) -> Result<Branch, EvalError> {
    let integral = integral_to_infinity(decay, 1.0)?;
    if !integral.is_finite() {
        return Ok(Branch {
            class: LimitClass::NotApplicable,
            integral,
            samples: Vec::new(),
        });
    }
    let mut acc = Cumulative::new(|s| growth.at(s));
    let mut samples = Vec::new();
    let mut t = 1.0;
    while t <= horizon {
        let a = acc.at(t)?;
        let tail = improper_of(|s| decay.at(s), decay, t, t, DoublingRule::relative())?;
        let product = if tail.value == 0.0 { 0.0 } else { a * tail.value.powf(1.0 / (q - 1.0)) };
        samples.push((t, product));
        t *= 2.0;
    }
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(Branch {
        class: classify_limit(&values),
        integral,
        samples,
    })
}

/// Samples `∫_0^t k̄ · (∫_t^∞ c0)^{1/(p-1)}` (and the symmetric quantity
/// for `l > 1`) at `t = 2^k ≤ horizon` and classifies the limit.
pub fn nontrivial_blowup_criterion(
    p: f64,
    l: f64,
    c0: &dyn TimeFunction,
    k0: &dyn TimeFunction,
    cbar: &dyn TimeFunction,
    kbar: &dyn TimeFunction,
    horizon: f64,
) -> Result<CriterionReport, OdeError> {
    if !(p > 1.0 || l > 1.0) {
        return Err(OdeError::Exponents(format!("criterion needs p > 1 or l > 1, got p={p}, l={l}")));
    }
    if !(horizon >= 16.0) {
        return Err(OdeError::Invalid(format!("horizon must be at least 16, got {horizon}")));
    }
    let mut branches = Vec::new();
    if p > 1.0 {
        branches.push(("p", limit_branch(p, c0, kbar, horizon)?));
    }
    if l > 1.0 {
        branches.push(("l", limit_branch(l, k0, cbar, horizon)?));
    }
    let overall = branches
        .iter()
        .map(|(_, b)| b.class)
        .max_by_key(|c| c.rank())
        .expect("at least one branch");
    let mut report = CriterionReport::new("nontrivial_blowup", overall == LimitClass::Diverges, overall.name())
        .with("horizon", horizon);
    for (tag, b) in &branches {
        report = report
            .with(&format!("{tag}.decay_integral"), b.integral.value)
            .note(format!("{tag}-branch: {}", b.class.name()));
        if let Some(&(t, v)) = b.samples.last() {
            report = report.with(&format!("{tag}.last_t"), t).with(&format!("{tag}.last_product"), v);
        }
        if b.samples.len() >= 2 {
            let (prev, last) = (b.samples[b.samples.len() - 2].1, b.samples[b.samples.len() - 1].1);
            report = report.with(&format!("{tag}.last_ratio"), if prev > 0.0 { last / prev } else { f64::NAN });
        }
    }
    Ok(report)
}

pub fn tail_status_name(s: TailStatus) -> &'static str {
    match s {
        TailStatus::Converged => "Converged",
        TailStatus::Extrapolated => "Extrapolated",
        TailStatus::Divergent => "Divergent",
    }
}
