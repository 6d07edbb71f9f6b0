use serde::{Deserialize, Serialize};

use super::families::{Family, SupersolutionCandidate};
use super::verify::VerificationReport;
use super::SuperError;

/// Relative size of the adversarial perturbations.
pub const PERTURBATION: f64 = 0.05;

/// Slack left after tightening, relative to the verifier's limit.
const MARGIN: f64 = 5e-3;
const BISECTION_REL: f64 = 1e-4;
const UNBOUNDED_FACTOR: f64 = 1_048_576.0;
const MAX_SWEEPS: usize = 4;

/// The direction in which a parameter violates its inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Family {
    /// Parameters with the direction that breaks the supersolution.
    pub fn adversaries(self) -> &'static [(&'static str, Direction)] {
        use Direction::*;
        match self {
            Family::SmallExp => &[("a", Down), ("b", Down), ("d", Down)],
            Family::Superlinear => &[("a", Up), ("V", Down)],
            Family::P1Exp => &[("b", Up), ("C", Down), ("epsilon", Down)],
            Family::P1Bounded => &[("a", Up)],
            Family::L1Pg1 => &[("a", Down), ("S", Down)],
        }
    }

    /// Parameters the constructions choose by a sufficient inequality and
    /// which tightening may move towards the verifier's limit.
    fn tunable(self) -> &'static [&'static str] {
        match self {
            Family::SmallExp => &["a", "d", "b"],
            Family::Superlinear => &["a"],
            Family::P1Exp => &["b"],
            Family::P1Bounded => &["a"],
            Family::L1Pg1 => &[],
        }
    }
}

fn direction_of(family: Family, name: &str) -> Direction {
    family
        .adversaries()
        .iter()
        .find(|(p, _)| *p == name)
        .map(|(_, d)| *d)
        .expect("tunable parameters are listed as adversaries")
}

fn passes_own(cand: &SupersolutionCandidate, name: &str, value: f64) -> bool {
    cand.with_param(name, value)
        .and_then(|c| c.verify_own())
        .map(|r| r.passed)
        .unwrap_or(false)
}

/// Moves `name` to within [`MARGIN`] of the verifier's limit. Returns the
/// new value, or `None` if the verifier places no limit on it.
fn tighten_one(cand: &SupersolutionCandidate, name: &str) -> Option<f64> {
    let v0 = cand.param(name);
    if v0 == 0.0 {
        return None;
    }
    match direction_of(cand.family, name) {
        Direction::Down => {
            if passes_own(cand, name, 0.0) {
                return Some(0.0);
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while hi - lo > BISECTION_REL * hi {
                let mid = 0.5 * (lo + hi);
                if passes_own(cand, name, v0 * mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let padded = (hi * (1.0 + MARGIN)).min(1.0);
            Some(v0 * if passes_own(cand, name, v0 * padded) { padded } else { hi })
        }
        Direction::Up => {
            if passes_own(cand, name, v0 * UNBOUNDED_FACTOR) {
                return None;
            }
            let (mut lo, mut hi) = (1.0, 2.0);
            while passes_own(cand, name, v0 * hi) {
                lo = hi;
                hi *= 2.0;
            }
            while hi - lo > BISECTION_REL * lo {
                let mid = 0.5 * (lo + hi);
                if passes_own(cand, name, v0 * mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let padded = (lo * (1.0 - MARGIN)).max(1.0);
            Some(v0 * if passes_own(cand, name, v0 * padded) { padded } else { lo })
        }
    }
}

/// Replaces the parameters chosen by sufficient inequalities with values
/// just inside what the verifier accepts, so that small adversarial
/// changes are detected. The result is re-verified against the initial
/// datum it admits.
pub fn tighten(cand: &SupersolutionCandidate) -> Result<SupersolutionCandidate, SuperError> {
    let mut current = cand.clone();
    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for &name in current.family.tunable() {
            if let Some(v) = tighten_one(&current, name) {
                let old = current.param(name);
                if (v - old).abs() > 1e-3 * old.abs() {
                    moved = true;
                }
                current = current.with_param(name, v)?;
            }
        }
        if !moved {
            break;
        }
    }
    let settled = current.settle()?;
    if !settled.report.passed {
        return Err(SuperError::Unverified(format!("{} after tightening", settled.family.tag())));
    }
    Ok(settled)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub param: String,
    pub direction: Direction,
    pub original: f64,
    pub perturbed: f64,
    /// Whether the verifier bounds this parameter at all; unbounded
    /// parameters have no violating perturbation.
    pub constrained: bool,
    /// Verification of the perturbed candidate against the unperturbed
    /// target; `None` when it could not be evaluated.
    pub report: Option<VerificationReport>,
    /// The perturbation was detected (verification failed or could not be
    /// carried out).
    pub detected: bool,
}

fn passes_target(cand: &SupersolutionCandidate, name: &str, value: f64) -> Result<VerificationReport, SuperError> {
    cand.with_param(name, value)?.verify()
}

/// Perturbs each parameter by `factor` in its violating direction and
/// verifies against the unperturbed candidate's target.
pub fn perturbation_check(cand: &SupersolutionCandidate, factor: f64) -> Vec<PerturbationOutcome> {
    cand.family
        .adversaries()
        .iter()
        .map(|&(name, direction)| {
            let original = cand.param(name);
            let (perturbed, extreme) = match direction {
                Direction::Up => (original * (1.0 + factor), original * UNBOUNDED_FACTOR),
                Direction::Down => (original * (1.0 - factor), 0.0),
            };
            let constrained = original != 0.0 && !passes_target(cand, name, extreme).map(|r| r.passed).unwrap_or(false);
            let report = passes_target(cand, name, perturbed).ok();
            let detected = report.map(|r| !r.passed).unwrap_or(true);
            PerturbationOutcome {
                param: name.to_string(),
                direction,
                original,
                perturbed,
                constrained,
                report,
                detected,
            }
        })
        .collect()
}
