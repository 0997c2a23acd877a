//! Scalar expressions in the variables `x` and `t`.
//!
//! Coefficients of a system are given as strings such as `"1 + 0.5*sin(2*pi*x)"`.
//! They are parsed into an [`Expr`] tree, evaluated with domain checks and
//! differentiated symbolically.

mod diff;
mod eval;
mod parse;
mod print;

use thiserror::Error;

pub(crate) use diff::{add, div, mul, neg, sub};
pub use eval::EvalError;
pub use parse::{ParseError, ParseErrorKind};

/// Independent variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    T,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
    Log,
}

impl UnaryOp {
    /// Function name as written in source, `None` for negation.
    pub fn func_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Tanh => Some("tanh"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Log => Some("log"),
        }
    }

    pub fn from_func_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "tanh" => UnaryOp::Tanh,
            "sqrt" => UnaryOp::Sqrt,
            "log" => UnaryOp::Log,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree. Structural equality compares constants by value.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Error)]
pub enum ExprError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("periodicity check needs at least 16 x samples, got {0}")]
    TooFewSamples(usize),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Parses an expression. See the crate README for the grammar.
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        parse::parse(src)
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        eval::eval(self, x, t)
    }

    /// Symbolic partial derivative with light algebraic cleanup.
    pub fn diff(&self, v: Var) -> Expr {
        diff::diff(self, v)
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Unary(_, e) => e.depends_on(v),
            Expr::Binary(_, l, r) => l.depends_on(v) || r.depends_on(v),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Folds every subtree that does not depend on a variable into a constant.
    /// Subtrees whose evaluation fails are kept so that the error surfaces at
    /// evaluation time.
    pub fn fold_constants(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, e) => {
                let e = e.fold_constants();
                let out = Expr::unary(*op, e);
                fold_if_const(out)
            }
            Expr::Binary(op, l, r) => {
                let out = Expr::binary(*op, l.fold_constants(), r.fold_constants());
                fold_if_const(out)
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, e) => 1 + e.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }
}

fn fold_if_const(e: Expr) -> Expr {
    let all_const = match &e {
        Expr::Unary(_, a) => a.as_const().is_some(),
        Expr::Binary(_, a, b) => a.as_const().is_some() && b.as_const().is_some(),
        _ => false,
    };
    if all_const {
        if let Ok(v) = e.eval(0.0, 0.0) {
            return Expr::Const(v);
        }
    }
    e
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

/// Largest `|e(x+1,t) - e(x,t)|` over `x = i/n_x` and the given times.
pub fn periodicity_defect(e: &Expr, t_samples: &[f64], n_x: usize) -> Result<f64, ExprError> {
    if n_x < 16 {
        return Err(ExprError::TooFewSamples(n_x));
    }
    let mut worst = 0.0f64;
    for &t in t_samples {
        for i in 0..n_x {
            let x = i as f64 / n_x as f64;
            let d = (e.eval(x + 1.0, t)? - e.eval(x, t)?).abs();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Checks `e(x+1,t) = e(x,t)` up to `tol` on `n_x` points per sampled time.
pub fn check_x_periodicity(
    e: &Expr,
    t_samples: &[f64],
    n_x: usize,
    tol: f64,
) -> Result<bool, ExprError> {
    Ok(periodicity_defect(e, t_samples, n_x)? <= tol)
}
