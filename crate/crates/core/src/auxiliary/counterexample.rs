use crate::expr::{EvalError, TimeFunction};

use super::AuxError;

/// Flux with integrable spikes on `O_n = [n - 1/n³, n]`, `n ≥ 2`:
///
/// `g(t) = 1 / (√(n + 1/n⁶ - t) · |ln(n + 1/n⁶ - t)|^α)` on `O_n`, zero
/// elsewhere. `∫g` converges while the singular window integral at
/// `t = n` grows like `(ln n)^{1-α}`.
///
/// In double precision the shift `1/n⁶` drops below the spacing of floats
/// near `n` once `n ≳ 170`, so window integrals are only meaningful on
/// horizons up to about `128`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterexampleG {
    pub alpha: f64,
}

pub fn counterexample_g(alpha: f64) -> Result<CounterexampleG, AuxError> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(AuxError::Invalid(format!("exponent must lie in (1/2, 1), got {alpha}")));
    }
    Ok(CounterexampleG { alpha })
}

impl CounterexampleG {
    fn spike_start(n: f64) -> f64 {
        n - n.powi(-3)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = t.ceil();
        if n < 2.0 || t < Self::spike_start(n) {
            return 0.0;
        }
        let s = (n - t) + n.powi(-6);
        1.0 / (s.sqrt() * s.ln().abs().powf(self.alpha))
    }
}

impl TimeFunction for CounterexampleG {
    fn at(&self, t: f64) -> Result<f64, EvalError> {
        Ok(self.eval(t))
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut n = a.floor().max(2.0);
        while n <= b.ceil() + 1.0 {
            for p in [Self::spike_start(n), n] {
                if p > a && p < b {
                    out.push(p);
                }
            }
            n += 1.0;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_spike_end_and_filler() {
        let g = counterexample_g(0.75).unwrap();
        let s: f64 = 1.0 / 729.0;
        let expected = 1.0 / (s.sqrt() * s.ln().abs().powf(0.75));
        assert!((g.eval(3.0) / expected - 1.0).abs() < 1e-12);
        assert_eq!(g.eval(3.5), 0.0);
        assert_eq!(g.eval(1.0), 0.0);
        assert!(g.eval(3.0 - 0.5 / 27.0) > 0.0);
        assert!(counterexample_g(0.5).is_err());
        assert!(counterexample_g(1.0).is_err());
    }

    #[test]
    fn breakpoints_bracket_spikes() {
        let g = counterexample_g(0.75).unwrap();
        let b = g.breakpoints(2.5, 4.5);
        assert_eq!(b, vec![3.0 - 1.0 / 27.0, 3.0, 4.0 - 1.0 / 64.0, 4.0]);
    }
}
