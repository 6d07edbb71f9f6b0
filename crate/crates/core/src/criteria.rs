//! One pass over every analytic criterion that applies to a problem, and
//! the overall verdict they support.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ProblemSpec, ReducedCoefficients, Reduction, Regime};
use crate::expr::EvalError;
use crate::ode::{blowup_threshold, nontrivial_blowup_criterion, tail_status_name, OdeError, ThresholdCase, ThresholdReport};
use crate::pde::{Grid1D, PdeError};
use crate::report::CriterionReport;
use crate::supersolutions::{small_data_hypotheses, SuperConfig, SuperError};

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Super(#[from] SuperError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriteriaConfig {
    /// Spatial samples for the coefficient reductions and grid checks.
    pub samples: usize,
    /// Initial horizon of the improper integrals.
    pub integral_horizon: f64,
    /// Largest `t` at which the nontrivial blow-up products are sampled.
    pub limit_horizon: f64,
    /// Window, horizon and time range for the small-data hypotheses.
    pub supers: SuperConfig,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        CriteriaConfig {
            samples: 201,
            integral_horizon: 16.0,
            limit_horizon: 256.0,
            supers: SuperConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OverallVerdict {
    /// `max(p, l) ≤ 1`.
    AllGlobal,
    BlowsUpForAllNontrivial,
    /// Initial masses above `threshold` blow up.
    BlowsUpAboveThreshold { threshold: f64 },
    SmallDataGlobal,
    NoVerdict,
}

impl OverallVerdict {
    pub fn label(&self) -> String {
        match self {
            OverallVerdict::AllGlobal => "AllGlobal".into(),
            OverallVerdict::BlowsUpForAllNontrivial => "BlowsUpForAllNontrivial".into(),
            OverallVerdict::BlowsUpAboveThreshold { threshold } => format!("BlowsUpAboveThreshold({threshold})"),
            OverallVerdict::SmallDataGlobal => "SmallDataGlobal".into(),
            OverallVerdict::NoVerdict => "NoVerdict".into(),
        }
    }

    /// Whether the verdict predicts blow-up for initial mass `w0`.
    pub fn predicts_blowup(&self, w0: f64) -> bool {
        match self {
            OverallVerdict::BlowsUpForAllNontrivial => w0 > 0.0,
            OverallVerdict::BlowsUpAboveThreshold { threshold } => w0 > *threshold,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub regime: Regime,
    pub p: f64,
    pub l: f64,
    pub w0: f64,
    pub verdict: OverallVerdict,
    /// Smallest applicable blow-up threshold, when there is one.
    pub threshold: Option<f64>,
    /// `w0 > threshold`.
    pub w0_exceeds_threshold: Option<bool>,
    pub thresholds: Vec<ThresholdReport>,
    pub criteria: Vec<CriterionReport>,
}

fn threshold_report(t: &ThresholdReport) -> CriterionReport {
    let blows = t.w0 > t.threshold;
    let mut r = CriterionReport::new(
        format!("threshold_{}", serde_json::to_value(t.case).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()),
        blows,
        if blows { "BlowsUp" } else { "Inconclusive" },
    )
    .with("threshold", t.threshold)
    .with("w0", t.w0);
    for (name, i) in &t.integrals {
        r = r.with(&format!("integral_{name}"), i.value).note(format!("{name}: {}", tail_status_name(i.status)));
    }
    r
}

/// Evaluates the threshold cases, the nontrivial blow-up criterion and the
/// small-data hypotheses that apply to `spec`, and combines them. Blow-up
/// results take precedence over small-data global existence, which only
/// concerns data below an unspecified size.
pub fn evaluate_criteria(spec: &ProblemSpec, cfg: &CriteriaConfig) -> Result<CriteriaReport, CriteriaError> {
    let (p, l) = (spec.exponents.p, spec.exponents.l);
    let regime = spec.regime();
    let w0 = spec.initial_mass(cfg.samples)?;
    let mut report = CriteriaReport {
        regime,
        p,
        l,
        w0,
        verdict: OverallVerdict::NoVerdict,
        threshold: None,
        w0_exceeds_threshold: None,
        thresholds: Vec::new(),
        criteria: Vec::new(),
    };
    if regime == Regime::SublinearAllGlobal {
        report.verdict = OverallVerdict::AllGlobal;
        report.criteria.push(
            CriterionReport::new("sublinear", true, "AllGlobal")
                .with("p", p)
                .with("l", l)
                .note("max(p, l) <= 1: every solution is global"),
        );
        return Ok(report);
    }

    let reduced = ReducedCoefficients::new(spec, cfg.samples);
    let c0 = reduced.function(Reduction::C0);
    let k0 = reduced.function(Reduction::K0);
    let cbar = reduced.function(Reduction::Cbar);
    let kbar = reduced.function(Reduction::Kbar);

    for case in ThresholdCase::all().into_iter().filter(|c| c.applies(p, l)) {
        let t = blowup_threshold(case, p, l, &c0, &k0, cfg.integral_horizon, w0)?;
        report.criteria.push(threshold_report(&t));
        report.thresholds.push(t);
    }
    let threshold = report.thresholds.iter().map(|t| t.threshold).fold(f64::INFINITY, f64::min);

    let nontrivial = nontrivial_blowup_criterion(p, l, &c0, &k0, &cbar, &kbar, cfg.limit_horizon)?;
    let all_nontrivial = nontrivial.passed || threshold == 0.0;
    report.criteria.push(nontrivial);

    let grid = Grid1D::new(spec.domain, cfg.samples)?;
    let small = small_data_hypotheses(spec, &grid, &cfg.supers)?;
    let small_holds = small.as_ref().is_some_and(|r| r.passed);
    report.criteria.extend(small);

    if threshold.is_finite() {
        report.threshold = Some(threshold);
        report.w0_exceeds_threshold = Some(w0 > threshold);
    }
    report.verdict = if all_nontrivial {
        OverallVerdict::BlowsUpForAllNontrivial
    } else if threshold.is_finite() {
        OverallVerdict::BlowsUpAboveThreshold { threshold }
    } else if small_holds {
        OverallVerdict::SmallDataGlobal
    } else {
        OverallVerdict::NoVerdict
    };
    Ok(report)
}
