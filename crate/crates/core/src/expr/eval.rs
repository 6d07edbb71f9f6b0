use super::{BinOp, EvalError, Func, Node, Var};

/// Variable values for [`super::CoefficientExpr::eval`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub t: Option<f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn x(mut self, v: f64) -> Self {
        self.x = Some(v);
        self
    }

    pub fn y(mut self, v: f64) -> Self {
        self.y = Some(v);
        self
    }

    pub fn t(mut self, v: f64) -> Self {
        self.t = Some(v);
        self
    }

    pub fn get(&self, v: Var) -> Option<f64> {
        match v {
            Var::X => self.x,
            Var::Y => self.y,
            Var::T => self.t,
        }
    }
}

pub(super) fn eval(n: &Node, x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
    let r = match n {
        Node::Num(v) => return Ok(*v),
        Node::Var(Var::X) => return Ok(x),
        Node::Var(Var::Y) => return Ok(y),
        Node::Var(Var::T) => return Ok(t),
        Node::Neg(a) => -eval(a, x, y, t)?,
        Node::Bin(op, a, b) => {
            let a = eval(a, x, y, t)?;
            let b = eval(b, x, y, t)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => pow(a, b)?,
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x, y, t)?;
            match f {
                Func::Exp => a.exp(),
                Func::Ln => {
                    if a <= 0.0 {
                        return Err(EvalError::LogDomain(a));
                    }
                    a.ln()
                }
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(EvalError::SqrtDomain(a));
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
            }
        }
        Node::Min(a, b) => eval(a, x, y, t)?.min(eval(b, x, y, t)?),
        Node::Max(a, b) => eval(a, x, y, t)?.max(eval(b, x, y, t)?),
        Node::Piecewise {
            lhs,
            cmp,
            rhs,
            then,
            otherwise,
        } => {
            if cmp.holds(eval(lhs, x, y, t)?, eval(rhs, x, y, t)?) {
                eval(then, x, y, t)?
            } else {
                eval(otherwise, x, y, t)?
            }
        }
    };
    if r.is_finite() {
        Ok(r)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalError::PowDomain { base, exponent });
    }
    if exponent == 2.0 {
        return Ok(base * base);
    }
    Ok(base.powf(exponent))
}
