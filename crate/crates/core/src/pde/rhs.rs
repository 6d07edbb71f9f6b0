use std::sync::Arc;

use super::{Grid1D, PdeError, State};
use crate::domain::ProblemSpec;
use crate::expr::{CoefficientExpr, TimeFunction, Var};

/// `v^e` for `v ≥ 0` with the integer cases done by multiplication.
#[inline]
pub(crate) fn power(v: f64, e: f64) -> f64 {
    if e == 1.0 {
        v
    } else if e == 2.0 {
        v * v
    } else if e == 3.0 {
        v * v * v
    } else if v == 0.0 {
        if e > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        v.powf(e)
    }
}

/// How the boundary flux `∂u/∂ν` is produced at each endpoint.
#[derive(Clone)]
pub enum FluxModel {
    /// `∫ k(x_b, y, t) u^l(y, t) dy`.
    Nonlocal { k: CoefficientExpr, l: f64 },
    /// The same prescribed `g(t)` at both endpoints.
    Prescribed(Arc<dyn TimeFunction>),
}

/// Nodal samples of a coefficient, refreshed only when `t` changes and the
/// coefficient actually depends on time.
struct Sampled {
    values: Vec<f64>,
    at: Option<f64>,
    time_dependent: bool,
}

impl Sampled {
    fn new(len: usize, time_dependent: bool) -> Self {
        Sampled {
            values: vec![0.0; len],
            at: None,
            time_dependent,
        }
    }

    fn stale(&self, t: f64) -> bool {
        match self.at {
            None => true,
            Some(s) => self.time_dependent && s != t,
        }
    }
}

/// The semi-discrete system `u' = F(t, u)` on a grid.
pub struct MolSystem {
    grid: Grid1D,
    c: CoefficientExpr,
    p: f64,
    reaction_free: bool,
    flux: FluxModel,
    c_nodes: Sampled,
    /// `w_j k(0, x_j, t)` followed by `w_j k(L, x_j, t)`.
    k_nodes: Sampled,
    ul: Vec<f64>,
}

impl MolSystem {
    pub fn new(grid: Grid1D, c: CoefficientExpr, p: f64, flux: FluxModel) -> Self {
        let n = grid.len();
        let reaction_free = c.used_vars().is_empty() && c.eval_xyt(0.0, 0.0, 0.0).map(|v| v == 0.0).unwrap_or(false);
        let k_time = match &flux {
            FluxModel::Nonlocal { k, .. } => k.depends_on(Var::T),
            FluxModel::Prescribed(_) => false,
        };
        MolSystem {
            c_nodes: Sampled::new(n, c.depends_on(Var::T)),
            k_nodes: Sampled::new(2 * n, k_time),
            ul: vec![0.0; n],
            grid,
            c,
            p,
            reaction_free,
            flux,
        }
    }

    pub fn from_spec(spec: &ProblemSpec, grid: Grid1D) -> Self {
        let flux = FluxModel::Nonlocal {
            k: spec.k.clone(),
            l: spec.exponents.l,
        };
        MolSystem::new(grid, spec.c.clone(), spec.exponents.p, flux)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn refresh(&mut self, t: f64) -> Result<(), PdeError> {
        if !self.reaction_free && self.c_nodes.stale(t) {
            for (v, &x) in self.c_nodes.values.iter_mut().zip(self.grid.nodes()) {
                *v = self.c.eval_xyt(x, 0.0, t)?;
            }
            self.c_nodes.at = Some(t);
        }
        if let FluxModel::Nonlocal { k, .. } = &self.flux {
            if self.k_nodes.stale(t) {
                let n = self.grid.len();
                let len = self.grid.length();
                for (j, (&y, &w)) in self.grid.nodes().iter().zip(self.grid.weights()).enumerate() {
                    self.k_nodes.values[j] = w * k.eval_xyt(0.0, y, t)?;
                    self.k_nodes.values[n + j] = w * k.eval_xyt(len, y, t)?;
                }
                self.k_nodes.at = Some(t);
            }
        }
        Ok(())
    }

    /// Boundary fluxes `(I_0, I_L)` for the current state.
    pub fn fluxes(&mut self, t: f64, u: &[f64]) -> Result<(f64, f64), PdeError> {
        self.refresh(t)?;
        match &self.flux {
            FluxModel::Prescribed(g) => {
                let v = g.at(t)?;
                Ok((v, v))
            }
            FluxModel::Nonlocal { l, .. } => {
                let n = self.grid.len();
                for (d, &v) in self.ul.iter_mut().zip(u) {
                    *d = power(v.max(0.0), *l);
                }
                let (k0, kl) = self.k_nodes.values.split_at(n);
                let i0: f64 = k0.iter().zip(&self.ul).map(|(a, b)| a * b).sum();
                let il: f64 = kl.iter().zip(&self.ul).map(|(a, b)| a * b).sum();
                if !(i0.is_finite() && il.is_finite()) {
                    return Err(PdeError::Overflow);
                }
                Ok((i0, il))
            }
        }
    }

    /// Evaluates `F(t, u)` into `out`.
    pub fn eval(&mut self, t: f64, u: &[f64], out: &mut [f64]) -> Result<(), PdeError> {
        let (i0, il) = self.fluxes(t, u)?;
        let n = self.grid.len();
        let h = self.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        out[0] = (2.0 * (u[1] - u[0]) + 2.0 * h * i0) * inv_h2;
        for i in 1..n - 1 {
            out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_h2;
        }
        out[n - 1] = (2.0 * (u[n - 2] - u[n - 1]) + 2.0 * h * il) * inv_h2;
        if !self.reaction_free {
            for ((o, &v), &c) in out.iter_mut().zip(u).zip(&self.c_nodes.values) {
                if c != 0.0 {
                    *o += c * power(v.max(0.0), self.p);
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::Overflow);
        }
        Ok(())
    }
}

/// One evaluation of the semi-discrete right-hand side at `state`.
pub fn semidiscrete_rhs(spec: &ProblemSpec, grid: &Grid1D, state: &State) -> Result<Vec<f64>, PdeError> {
    if state.u.len() != grid.len() {
        return Err(PdeError::InvalidConfig(format!(
            "state has {} values for a grid of {} nodes",
            state.u.len(),
            grid.len()
        )));
    }
    let mut sys = MolSystem::from_spec(spec, grid.clone());
    let mut out = vec![0.0; grid.len()];
    sys.eval(state.t, &state.u, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain1D;
    use std::f64::consts::PI;

    fn spec(c: &str, k: &str, p: f64, l: f64) -> ProblemSpec {
        ProblemSpec::from_strings(1.0, p, l, c, k, "0").unwrap()
    }

    fn grid(n: usize) -> Grid1D {
        Grid1D::new(Domain1D::unit(), n).unwrap()
    }

    #[test]
    fn constants_are_neumann_equilibria() {
        let g = grid(21);
        let s = State { t: 0.0, u: vec![5.0; 21] };
        let r = semidiscrete_rhs(&spec("0", "0", 2.0, 2.0), &g, &s).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn reaction_only() {
        let g = grid(21);
        let s = State { t: 0.0, u: vec![2.0; 21] };
        let r = semidiscrete_rhs(&spec("1", "0", 2.0, 2.0), &g, &s).unwrap();
        assert!(r.iter().all(|v| (v - 4.0).abs() < 1e-10));
    }

    #[test]
    fn cosine_is_second_order_eigenfunction() {
        let mut errs = Vec::new();
        for n in [41, 81, 161] {
            let g = grid(n);
            let u: Vec<f64> = g.nodes().iter().map(|x| (PI * x).cos()).collect();
            let s = State { t: 0.0, u: u.clone() };
            let r = semidiscrete_rhs(&spec("0", "0", 2.0, 2.0), &g, &s).unwrap();
            let e = r.iter().zip(&u).map(|(a, b)| (a + PI * PI * b).abs()).fold(0.0, f64::max);
            let h = g.spacing();
            assert!(e <= 2.0 * h * h * PI.powi(4) / 12.0 + 1e-9, "n={n} err={e}");
            errs.push(e);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn flux_enters_boundary_rows() {
        // k ≡ 1, l = 1, u ≡ 1: I = 1 at both ends, so the boundary rows are 2/h.
        let g = grid(11);
        let s = State { t: 0.0, u: vec![1.0; 11] };
        let r = semidiscrete_rhs(&spec("0", "1", 2.0, 1.0), &g, &s).unwrap();
        let h = g.spacing();
        assert!((r[0] - 2.0 / h).abs() < 1e-9);
        assert!((r[10] - 2.0 / h).abs() < 1e-9);
        assert!(r[1..10].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn overflow_is_reported() {
        let g = grid(11);
        let s = State { t: 0.0, u: vec![1e200; 11] };
        let r = semidiscrete_rhs(&spec("1", "0", 3.0, 2.0), &g, &s);
        assert!(matches!(r, Err(PdeError::Overflow)));
    }
}
