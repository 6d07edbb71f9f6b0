//! Explicit supersolutions: the five constructions, a residual verifier for
//! any candidate, and the tightening used to show that the verifier is not
//! vacuous.

mod families;
mod tighten;
mod verify;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auxiliary::AuxError;
use crate::domain::SpecError;
use crate::expr::{EvalError, ParseError};
use crate::ode::OdeError;
use crate::pde::{Grid1D, PdeError, SolverConfig};
use crate::tridiag;

pub use families::{
    construct_l1_pg1, construct_p1_bounded, construct_p1_exp, construct_small_exponent, construct_superlinear,
    small_data_hypotheses, CandidateRecord, Family, L1Pg1Options, P1ExpOptions, SupersolutionCandidate,
};
pub use tighten::{perturbation_check, tighten, Direction, PerturbationOutcome, PERTURBATION};
pub use verify::{
    time_grid, verify_supersolution, ExprCandidate, Profile, ProfileSample, ResidualMin, VerificationGrid,
    VerificationReport,
};

#[derive(Debug, Error)]
pub enum SuperError {
    #[error("{0}")]
    Invalid(String),
    #[error("hypothesis fails: {0}")]
    Hypothesis(String),
    #[error("parameter iteration did not converge after {rounds} rounds (last iterate {last:?})")]
    NoConvergence { rounds: usize, last: BTreeMap<String, f64> },
    #[error("no admissible parameter: {0}")]
    NoAdmissible(String),
    #[error("candidate is not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("non-finite residual: {0}")]
    NonFinite(String),
    #[error("constructed candidate fails verification: {0}")]
    Unverified(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Aux(#[from] AuxError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Settings shared by the constructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuperConfig {
    /// Time window `[0, T]` for coefficient bounds and verification.
    pub t_end: f64,
    pub time_nodes: usize,
    pub tol: f64,
    /// Settings for the auxiliary heat solves (`t_end` and output times are
    /// overridden).
    pub solver: SolverConfig,
    pub window_t0: f64,
    pub window_alpha: f64,
    pub window_horizon: f64,
    /// Initial horizon for improper integrals.
    pub integral_horizon: f64,
}

impl Default for SuperConfig {
    fn default() -> Self {
        SuperConfig {
            t_end: 4.0,
            time_nodes: 201,
            tol: 1e-8,
            solver: SolverConfig::default(),
            window_t0: 0.5,
            window_alpha: 1.0,
            window_horizon: 128.0,
            integral_horizon: 16.0,
        }
    }
}

impl SuperConfig {
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        time_grid(self.t_end, self.time_nodes)
    }

    fn validate(&self) -> Result<(), SuperError> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SuperError::Invalid(format!("T must be positive, got {}", self.t_end)));
        }
        if self.time_nodes < 2 {
            return Err(SuperError::Invalid("need at least two verification times".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(SuperError::Invalid(format!("tolerance must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// First Dirichlet eigenpair of `-d²/dx²` on `(0, L)`, normalized to
/// `sup φ = 1`, with a finite-difference cross-check of `λ₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi: Vec<f64>,
    /// `(φ')²` at the nodes.
    pub dphi_sq: Vec<f64>,
    /// `∂φ/∂ν`, the same at both ends.
    pub dphi_dnu_max: f64,
    /// Smallest eigenvalue of the 3-point Dirichlet Laplacian.
    pub lambda1_fd: f64,
    /// Its eigenvector, normalized to maximum 1.
    pub phi_fd: Vec<f64>,
}

impl EigenPair {
    /// `sup |φ'|²`.
    pub fn sup_grad_sq(&self) -> f64 {
        self.dphi_dnu_max * self.dphi_dnu_max
    }
}

const INVERSE_ITERATIONS: usize = 200;

pub fn eigen_first_dirichlet(grid: &Grid1D) -> EigenPair {
    let len = grid.length();
    let k = PI / len;
    let n = grid.len();
    let mut phi: Vec<f64> = grid.nodes().iter().map(|&x| (k * x).sin()).collect();
    phi[0] = 0.0;
    phi[n - 1] = 0.0;
    if n % 2 == 1 {
        phi[n / 2] = 1.0;
    }
    let dphi_sq = grid.nodes().iter().map(|&x| (k * (k * x).cos()).powi(2)).collect();

    let h = grid.spacing();
    let m = n - 2;
    let inv = 1.0 / (h * h);
    let lower = vec![-inv; m];
    let diag = vec![2.0 * inv; m];
    let upper = vec![-inv; m];
    let mut y = vec![1.0; m];
    let mut lambda = 0.0;
    for _ in 0..INVERSE_ITERATIONS {
        let z = tridiag::solve(&lower, &diag, &upper, &y).expect("Dirichlet Laplacian is nonsingular");
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let next: Vec<f64> = z.iter().map(|v| v / norm).collect();
        let mut ay = 0.0;
        for i in 0..m {
            let left = if i > 0 { next[i - 1] } else { 0.0 };
            let right = if i + 1 < m { next[i + 1] } else { 0.0 };
            ay += next[i] * (2.0 * next[i] - left - right) * inv;
        }
        let done = (ay - lambda).abs() <= 1e-15 * ay;
        lambda = ay;
        y = next;
        if done {
            break;
        }
    }
    let top = y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut phi_fd = vec![0.0; n];
    for (dst, v) in phi_fd[1..n - 1].iter_mut().zip(&y) {
        *dst = v.abs() / top;
    }
    EigenPair {
        lambda1: k * k,
        phi,
        dphi_sq,
        dphi_dnu_max: -k,
        lambda1_fd: lambda,
        phi_fd,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain1D;

    #[test]
    fn unit_interval_eigenpair() {
        let g = Grid1D::new(Domain1D::unit(), 101).unwrap();
        let e = eigen_first_dirichlet(&g);
        assert!((e.lambda1 - PI * PI).abs() < 1e-14);
        assert!((e.dphi_dnu_max + PI).abs() < 1e-14);
        assert_eq!(e.phi[0], 0.0);
        assert_eq!(e.phi[100], 0.0);
        assert!((e.phi.iter().fold(0.0_f64, |a, &b| a.max(b)) - 1.0).abs() < 1e-10);
        let h: f64 = 0.01;
        let discrete = 2.0 * (1.0 - (PI * h).cos()) / (h * h);
        assert!((e.lambda1_fd - discrete).abs() < 1e-9, "{} vs {discrete}", e.lambda1_fd);
        assert!((e.lambda1_fd - PI * PI).abs() < 1e-3);
        for (a, b) in e.phi.iter().zip(&e.phi_fd) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn eigenvalue_scales_with_length() {
        let g = Grid1D::new(Domain1D::new(2.0).unwrap(), 201).unwrap();
        let e = eigen_first_dirichlet(&g);
        assert!((e.lambda1 - PI * PI / 4.0).abs() < 1e-14);
        assert!((e.lambda1_fd - e.lambda1).abs() < 1e-3);
    }

    #[test]
    fn fd_eigenvalue_converges_at_second_order() {
        let err = |n| {
            let g = Grid1D::new(Domain1D::unit(), n).unwrap();
            let e = eigen_first_dirichlet(&g);
            (e.lambda1_fd - e.lambda1).abs()
        };
        let order = (err(51) / err(101)).log2();
        assert!((order - 2.0).abs() < 0.05, "{order}");
    }
}
