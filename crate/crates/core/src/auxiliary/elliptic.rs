use serde::{Deserialize, Serialize};

use super::AuxError;
use crate::pde::Grid1D;
use crate::tridiag;

/// Discrete solution of `v'' = a v`, `-v'(0) = g0`, `v'(L) = gL` with
/// `a = g0 + gL`. Integrating the equation gives `a ∫v = g0 + gL`, so
/// `∫v = 1` and every `h = α v` solves `h'' = a h`, `∂h/∂ν = g ∫h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticNonlocal {
    pub g0: f64,
    pub gl: f64,
    pub a: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub v: Vec<f64>,
}

impl EllipticNonlocal {
    /// `∫v` by the trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.weights.iter().zip(&self.v).map(|(w, v)| w * v).sum()
    }

    /// `a ∫v - (g0 + gL)`.
    pub fn normalization_residual(&self) -> f64 {
        self.a * self.integral() - (self.g0 + self.gl)
    }

    pub fn scaled(&self, alpha: f64) -> Vec<f64> {
        self.v.iter().map(|v| alpha * v).collect()
    }

    /// `∂h/∂ν - g ∫h` at both ends for `h = α v`, with the outward slope
    /// taken from the grid equation at the boundary node,
    /// `-h'(0) ≈ -(h_1 - h_0)/δ + δ a h_0 / 2`.
    pub fn boundary_residuals(&self, alpha: f64) -> [f64; 2] {
        let h = self.scaled(alpha);
        let n = h.len();
        let d = self.h;
        let mass: f64 = self.weights.iter().zip(&h).map(|(w, v)| w * v).sum();
        let out0 = -(h[1] - h[0]) / d + 0.5 * d * self.a * h[0];
        let out_l = (h[n - 1] - h[n - 2]) / d + 0.5 * d * self.a * h[n - 1];
        [out0 - self.g0 * mass, out_l - self.gl * mass]
    }

    /// As [`boundary_residuals`](Self::boundary_residuals), with one-sided
    /// second-order slopes instead. These carry the `O(δ²)` truncation
    /// error.
    pub fn one_sided_residuals(&self, alpha: f64) -> [f64; 2] {
        let h = self.scaled(alpha);
        let n = h.len();
        let d = self.h;
        let mass: f64 = self.weights.iter().zip(&h).map(|(w, v)| w * v).sum();
        let out0 = (3.0 * h[0] - 4.0 * h[1] + h[2]) / (2.0 * d);
        let out_l = (3.0 * h[n - 1] - 4.0 * h[n - 2] + h[n - 3]) / (2.0 * d);
        [out0 - self.g0 * mass, out_l - self.gl * mass]
    }
}

pub fn solve_elliptic_nonlocal(g0: f64, gl: f64, grid: &Grid1D) -> Result<EllipticNonlocal, AuxError> {
    if !(g0 >= 0.0 && gl >= 0.0) {
        return Err(AuxError::Invalid(format!("boundary data must be nonnegative, got {g0}, {gl}")));
    }
    let a = g0 + gl;
    if !(a > 0.0) {
        return Err(AuxError::Invalid("a = g0 + gL must be positive".into()));
    }
    let n = grid.len();
    let h = grid.spacing();
    let inv = 1.0 / (h * h);
    let mut lower = vec![inv; n];
    let mut upper = vec![inv; n];
    let diag = vec![-2.0 * inv - a; n];
    let mut rhs = vec![0.0; n];
    upper[0] = 2.0 * inv;
    lower[n - 1] = 2.0 * inv;
    rhs[0] = -2.0 * g0 / h;
    rhs[n - 1] = -2.0 * gl / h;
    let v = tridiag::solve(&lower, &diag, &upper, &rhs)?;
    if let Some((i, &bad)) = v.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(AuxError::Invalid(format!("discrete solution is negative at node {i}: {bad}")));
    }
    Ok(EllipticNonlocal {
        g0,
        gl,
        a,
        h,
        nodes: grid.nodes().to_vec(),
        weights: grid.weights().to_vec(),
        v,
    })
}

/// `ψ'' = 1` with outward slope `γ = L/2` at both ends and `ψ(0) = shift`;
/// the minimum is `shift - L²/8`, which must be positive.
pub fn solve_psi(grid: &Grid1D, shift: f64) -> Result<Vec<f64>, AuxError> {
    let len = grid.length();
    let min = shift - len * len / 8.0;
    if !(min > 0.0) {
        return Err(AuxError::Invalid(format!(
            "shift {shift} gives min ψ = {min}; it must exceed L²/8 = {}",
            len * len / 8.0
        )));
    }
    let gamma = 0.5 * len;
    let n = grid.len();
    let h = grid.spacing();
    let m = n - 1;
    let mut lower = vec![1.0; m];
    let mut upper = vec![1.0; m];
    let diag = vec![-2.0; m];
    let mut rhs = vec![h * h; m];
    upper[m - 1] = 0.0;
    lower[m - 1] = 2.0;
    rhs[0] -= shift;
    rhs[m - 1] = h * h - 2.0 * h * gamma;
    let inner = tridiag::solve(&lower, &diag, &upper, &rhs)?;
    let mut psi = Vec::with_capacity(n);
    psi.push(shift);
    psi.extend(inner);
    Ok(psi)
}
