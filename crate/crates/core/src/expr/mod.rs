//! Coefficient expressions.
//!
//! A closed little language for the coefficient functions `c(x,t)`,
//! `k(x,y,t)`, the initial datum `u0(x)` and the various time profiles used
//! by the criteria. Expressions are parsed once into an immutable tree and
//! evaluated in double precision.
//!
//! Grammar (loosest binding first):
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := ('-' | '+') unary | power
//! power    := primary ('^' unary)?            right-associative
//! primary  := number | 'pi' | 'e' | var
//!           | func '(' expr (',' expr)* ')'
//!           | 'piecewise' '(' expr cmp expr '?' expr ':' expr ')'
//!           | '(' expr ')'
//! cmp      := '<' | '<=' | '>' | '>=' | '≤' | '≥'
//! var      := 'x' | 'y' | 't'
//! func     := exp | ln | sin | cos | sqrt | abs | min | max
//! ```

mod diff;
mod eval;
mod parse;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use eval::Bindings;

/// One of the three variables a coefficient may depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    X,
    Y,
    T,
}

impl Var {
    const fn bit(self) -> u8 {
        match self {
            Var::X => 1,
            Var::Y => 2,
            Var::T => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
        }
    }
}

/// A set of variables, used both for declared arity and for the variables an
/// expression actually references.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct VarSet(u8);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);
    pub const X: VarSet = VarSet(1);
    pub const T: VarSet = VarSet(4);
    pub const XT: VarSet = VarSet(1 | 4);
    pub const XYT: VarSet = VarSet(1 | 2 | 4);

    pub fn of(vars: &[Var]) -> Self {
        VarSet(vars.iter().fold(0, |m, v| m | v.bit()))
    }

    pub fn contains(self, v: Var) -> bool {
        self.0 & v.bit() != 0
    }

    pub fn insert(&mut self, v: Var) {
        self.0 |= v.bit();
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
    Piecewise {
        lhs: Box<Node>,
        cmp: Cmp,
        rhs: Box<Node>,
        then: Box<Node>,
        otherwise: Box<Node>,
    },
}

impl Node {
    pub(crate) fn vars(&self) -> VarSet {
        let mut set = VarSet::EMPTY;
        self.collect_vars(&mut set);
        set
    }

    fn collect_vars(&self, set: &mut VarSet) {
        match self {
            Node::Num(_) => {}
            Node::Var(v) => set.insert(*v),
            Node::Neg(a) | Node::Call(_, a) => a.collect_vars(set),
            Node::Bin(_, a, b) | Node::Min(a, b) | Node::Max(a, b) => {
                a.collect_vars(set);
                b.collect_vars(set);
            }
            Node::Piecewise {
                lhs,
                rhs,
                then,
                otherwise,
                ..
            } => {
                for n in [lhs, rhs, then, otherwise] {
                    n.collect_vars(set);
                }
            }
        }
    }
}

/// Parse failure with the byte offset into the source text.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at offset {offset} is not allowed here")]
    WrongArity { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::WrongArity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("ln of nonpositive argument {0}")]
    LogDomain(f64),
    #[error("sqrt of negative argument {0}")]
    SqrtDomain(f64),
    #[error("power {base}^{exponent} is undefined")]
    PowDomain { base: f64, exponent: f64 },
    #[error("non-finite result")]
    NonFinite,
    #[error("variable `{0}` is not bound")]
    Unbound(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot differentiate `{construct}` with respect to {var}")]
pub struct DiffError {
    pub construct: &'static str,
    pub var: &'static str,
}

/// A parsed coefficient expression together with its declared arity.
#[derive(Clone)]
pub struct CoefficientExpr {
    root: Arc<Node>,
    arity: VarSet,
    used: VarSet,
    source: Option<Arc<str>>,
}

impl CoefficientExpr {
    pub fn parse(text: &str, arity: VarSet) -> Result<Self, ParseError> {
        let root = parse::parse(text, arity)?;
        let used = root.vars();
        Ok(CoefficientExpr {
            root: Arc::new(root),
            arity,
            used,
            source: Some(Arc::from(text.trim())),
        })
    }

    pub fn constant(value: f64, arity: VarSet) -> Self {
        Self::from_node(Node::Num(value), arity)
    }

    pub(crate) fn from_node(node: Node, arity: VarSet) -> Self {
        let used = node.vars();
        CoefficientExpr {
            root: Arc::new(node),
            arity,
            used,
            source: None,
        }
    }

    #[cfg(test)]
    pub(crate) fn node(&self) -> &Node {
        &self.root
    }

    pub fn arity(&self) -> VarSet {
        self.arity
    }

    /// Variables the expression actually references.
    pub fn used_vars(&self) -> VarSet {
        self.used
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.used.contains(v)
    }

    /// The original source text when the expression was parsed, otherwise
    /// the canonical printed form.
    pub fn source(&self) -> String {
        match &self.source {
            Some(s) => s.to_string(),
            None => self.to_string(),
        }
    }

    pub fn eval(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        for v in [Var::X, Var::Y, Var::T] {
            if self.used.contains(v) && bindings.get(v).is_none() {
                return Err(EvalError::Unbound(v.name()));
            }
        }
        eval::eval(&self.root, bindings.x.unwrap_or(0.0), bindings.y.unwrap_or(0.0), bindings.t.unwrap_or(0.0))
    }

    /// Evaluation with every variable supplied positionally. Unused
    /// variables are ignored.
    #[inline]
    pub fn eval_xyt(&self, x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
        eval::eval(&self.root, x, y, t)
    }

    pub fn differentiate(&self, var: Var) -> Result<CoefficientExpr, DiffError> {
        let d = diff::differentiate(&self.root, var)?;
        Ok(Self::from_node(d, self.arity))
    }

    /// `scale * self`, used by the sweep harness to rescale initial data.
    pub fn scaled(&self, scale: f64) -> CoefficientExpr {
        let node = Node::Bin(BinOp::Mul, Box::new(Node::Num(scale)), Box::new((*self.root).clone()));
        let mut e = Self::from_node(node, self.arity);
        e.source = self.source.as_ref().map(|s| Arc::from(format!("{scale:?}*({s})")));
        e
    }

    /// `self * exp(-rate * t)`; requires `t` in the arity.
    pub fn damped(&self, rate: f64) -> CoefficientExpr {
        let factor = Node::Call(
            Func::Exp,
            Box::new(Node::Neg(Box::new(Node::Bin(
                BinOp::Mul,
                Box::new(Node::Num(rate)),
                Box::new(Node::Var(Var::T)),
            )))),
        );
        let node = Node::Bin(BinOp::Mul, Box::new((*self.root).clone()), Box::new(factor));
        let mut e = Self::from_node(node, self.arity.union(VarSet::T));
        e.source = self.source.as_ref().map(|s| Arc::from(format!("({s})*exp(-{rate:?}*t)")));
        e
    }
}

impl fmt::Debug for CoefficientExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoefficientExpr({})", self)
    }
}

impl PartialEq for CoefficientExpr {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.root == other.root
    }
}

/// Fully parenthesized canonical form; re-parsing it yields the same tree up
/// to the representation of negative literals.
impl fmt::Display for CoefficientExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn write_node(n: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match n {
        Node::Num(v) => {
            if *v < 0.0 {
                write!(f, "(-{:?})", -v)
            } else {
                write!(f, "{v:?}")
            }
        }
        Node::Var(v) => f.write_str(v.name()),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(a, f)?;
            f.write_str(")")
        }
        Node::Bin(op, a, b) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            f.write_str("(")?;
            write_node(a, f)?;
            write!(f, " {sym} ")?;
            write_node(b, f)?;
            f.write_str(")")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, f)?;
            f.write_str(")")
        }
        Node::Min(a, b) | Node::Max(a, b) => {
            f.write_str(if matches!(n, Node::Min(..)) { "min(" } else { "max(" })?;
            write_node(a, f)?;
            f.write_str(", ")?;
            write_node(b, f)?;
            f.write_str(")")
        }
        Node::Piecewise {
            lhs,
            cmp,
            rhs,
            then,
            otherwise,
        } => {
            f.write_str("piecewise(")?;
            write_node(lhs, f)?;
            write!(f, " {} ", cmp.symbol())?;
            write_node(rhs, f)?;
            f.write_str(" ? ")?;
            write_node(then, f)?;
            f.write_str(" : ")?;
            write_node(otherwise, f)?;
            f.write_str(")")
        }
    }
}

impl Serialize for CoefficientExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source())
    }
}

/// Deserializes with the full `{x, y, t}` arity; callers that need a
/// narrower arity re-parse through [`CoefficientExpr::parse`].
impl<'de> Deserialize<'de> for CoefficientExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        CoefficientExpr::parse(&text, VarSet::XYT).map_err(serde::de::Error::custom)
    }
}

/// A scalar function of time. Implemented by expressions in `t` and by the
/// derived profiles (reduced coefficients, the counterexample flux).
pub trait TimeFunction: Send + Sync {
    fn at(&self, t: f64) -> Result<f64, EvalError>;

    /// Points in `(a, b)` where the function is not smooth. Quadrature
    /// splits there.
    fn breakpoints(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }
}

impl TimeFunction for CoefficientExpr {
    fn at(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(&Bindings::new().t(t))
    }
}

impl<T: TimeFunction + ?Sized> TimeFunction for Arc<T> {
    fn at(&self, t: f64) -> Result<f64, EvalError> {
        (**self).at(t)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        (**self).breakpoints(a, b)
    }
}

impl<T: TimeFunction + ?Sized> TimeFunction for &T {
    fn at(&self, t: f64) -> Result<f64, EvalError> {
        (**self).at(t)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        (**self).breakpoints(a, b)
    }
}

/// Adapts an infallible closure.
pub struct FnTime<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> TimeFunction for FnTime<F> {
    fn at(&self, t: f64) -> Result<f64, EvalError> {
        Ok((self.0)(t))
    }
}
