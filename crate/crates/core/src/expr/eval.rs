use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{op} is undefined for argument {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
}

fn finite(op: &'static str, v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

pub(super) fn pow(b: f64, p: f64) -> Result<f64, EvalError> {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        if b == 0.0 && p < 0.0 {
            return Err(EvalError::Domain { op: "^", arg: b });
        }
        return finite("^", b.powi(p as i32));
    }
    if b < 0.0 || (b == 0.0 && p < 0.0) {
        return Err(EvalError::Domain { op: "^", arg: b });
    }
    finite("^", b.powf(p))
}

pub(super) fn eval(e: &Expr, x: f64, t: f64) -> Result<f64, EvalError> {
    match e {
        Expr::Const(c) => Ok(*c),
        Expr::Var(Var::X) => Ok(x),
        Expr::Var(Var::T) => Ok(t),
        Expr::Unary(op, a) => {
            let v = eval(a, x, t)?;
            match op {
                UnaryOp::Neg => Ok(-v),
                UnaryOp::Sin => Ok(v.sin()),
                UnaryOp::Cos => Ok(v.cos()),
                UnaryOp::Exp => finite("exp", v.exp()),
                UnaryOp::Tanh => Ok(v.tanh()),
                UnaryOp::Sqrt => {
                    if v < 0.0 {
                        Err(EvalError::Domain { op: "sqrt", arg: v })
                    } else {
                        Ok(v.sqrt())
                    }
                }
                UnaryOp::Log => {
                    if v <= 0.0 {
                        Err(EvalError::Domain { op: "log", arg: v })
                    } else {
                        Ok(v.ln())
                    }
                }
            }
        }
        Expr::Binary(op, l, r) => {
            let a = eval(l, x, t)?;
            let b = eval(r, x, t)?;
            match op {
                BinaryOp::Add => finite("+", a + b),
                BinaryOp::Sub => finite("-", a - b),
                BinaryOp::Mul => finite("*", a * b),
                BinaryOp::Div => {
                    if b == 0.0 {
                        Err(EvalError::Domain { op: "/", arg: b })
                    } else {
                        finite("/", a / b)
                    }
                }
                BinaryOp::Pow => pow(a, b),
            }
        }
    }
}
