//! Numerical laboratory for the semilinear heat equation
//! `u_t = u_xx + c(x,t) u^p` on an interval with the nonlinear nonlocal
//! flux condition `∂u/∂ν = ∫ k(x,y,t) u^l(y,t) dy` at both endpoints.

pub mod auxiliary;
pub mod blowup;
pub mod criteria;
pub mod domain;
pub mod export;
pub mod expr;
pub mod ode;
pub mod pde;
pub mod quad;
pub mod report;
pub mod rk;
pub mod supersolutions;
pub mod tridiag;

pub use domain::{ProblemSpec, Reduced, ReducedCoefficients, Regime};
pub use expr::{CoefficientExpr, TimeFunction, Var, VarSet};
pub use report::CriterionReport;
