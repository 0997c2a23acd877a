use std::f64::consts::{E, PI};
use std::fmt;

use super::{BinaryOp, Expr, UnaryOp};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if c.is_sign_negative() => PREC_ATOM,
        Expr::Const(_) | Expr::Var(_) => PREC_ATOM,
        Expr::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Expr::Unary(..) => PREC_ATOM,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_ADD,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_MUL,
        Expr::Binary(BinaryOp::Pow, ..) => PREC_POW,
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c == PI {
        return f.write_str("pi");
    }
    if c == E {
        return f.write_str("e");
    }
    if c.is_sign_negative() {
        f.write_str("(-")?;
        write_const(f, -c)?;
        return f.write_str(")");
    }
    // Debug gives the shortest round-trip form, e.g. 0.1, 1e-7, 2.0
    write!(f, "{c:?}")
}

fn write_with(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        f.write_str("(")?;
        write_expr(f, e)?;
        f.write_str(")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Const(c) => write_const(f, *c),
        Expr::Var(v) => f.write_str(v.name()),
        Expr::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            // a constant operand would fold back on parsing
            if matches!(**a, Expr::Const(_)) {
                f.write_str("(")?;
                write_expr(f, a)?;
                return f.write_str(")");
            }
            write_with(f, a, PREC_NEG)
        }
        Expr::Unary(op, a) => {
            f.write_str(op.func_name().unwrap_or(""))?;
            f.write_str("(")?;
            write_expr(f, a)?;
            f.write_str(")")
        }
        Expr::Binary(op, l, r) => {
            let (sym, p) = match op {
                BinaryOp::Add => (" + ", PREC_ADD),
                BinaryOp::Sub => (" - ", PREC_ADD),
                BinaryOp::Mul => ("*", PREC_MUL),
                BinaryOp::Div => ("/", PREC_MUL),
                BinaryOp::Pow => ("^", PREC_POW),
            };
            if *op == BinaryOp::Pow {
                write_with(f, l, PREC_ATOM)?;
                f.write_str(sym)?;
                return write_with(f, r, PREC_NEG);
            }
            write_with(f, l, p)?;
            f.write_str(sym)?;
            write_with(f, r, p + 1)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}
