use super::{BinaryOp, Expr, UnaryOp, Var};

fn is(e: &Expr, c: f64) -> bool {
    matches!(e, Expr::Const(v) if *v == c)
}

pub(crate) fn c(v: f64) -> Expr {
    Expr::Const(v)
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    if is(&a, 0.0) {
        return b;
    }
    if is(&b, 0.0) {
        return a;
    }
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        return c(x + y);
    }
    Expr::binary(BinaryOp::Add, a, b)
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    if is(&b, 0.0) {
        return a;
    }
    if is(&a, 0.0) {
        return neg(b);
    }
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        return c(x - y);
    }
    Expr::binary(BinaryOp::Sub, a, b)
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if is(&a, 0.0) || is(&b, 0.0) {
        return c(0.0);
    }
    if is(&a, 1.0) {
        return b;
    }
    if is(&b, 1.0) {
        return a;
    }
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        return c(x * y);
    }
    Expr::binary(BinaryOp::Mul, a, b)
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if is(&a, 0.0) {
        return c(0.0);
    }
    if is(&b, 1.0) {
        return a;
    }
    Expr::binary(BinaryOp::Div, a, b)
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(v) => c(-v),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        e => Expr::unary(UnaryOp::Neg, e),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is(&b, 1.0) {
        return a;
    }
    if is(&b, 0.0) {
        return c(1.0);
    }
    Expr::binary(BinaryOp::Pow, a, b)
}

fn un(op: UnaryOp, a: Expr) -> Expr {
    Expr::unary(op, a)
}

pub(super) fn diff(e: &Expr, v: Var) -> Expr {
    if !e.depends_on(v) {
        return c(0.0);
    }
    match e {
        Expr::Const(_) => c(0.0),
        Expr::Var(w) => c(if *w == v { 1.0 } else { 0.0 }),
        Expr::Unary(op, a) => {
            let da = diff(a, v);
            let a = (**a).clone();
            let outer = match op {
                UnaryOp::Neg => return neg(da),
                UnaryOp::Sin => un(UnaryOp::Cos, a),
                UnaryOp::Cos => neg(un(UnaryOp::Sin, a)),
                UnaryOp::Exp => un(UnaryOp::Exp, a),
                UnaryOp::Tanh => sub(c(1.0), pow(un(UnaryOp::Tanh, a), c(2.0))),
                UnaryOp::Sqrt => return div(da, mul(c(2.0), un(UnaryOp::Sqrt, a))),
                UnaryOp::Log => return div(da, a),
            };
            mul(outer, da)
        }
        Expr::Binary(op, l, r) => {
            let dl = diff(l, v);
            let dr = diff(r, v);
            let (l, r) = ((**l).clone(), (**r).clone());
            match op {
                BinaryOp::Add => add(dl, dr),
                BinaryOp::Sub => sub(dl, dr),
                BinaryOp::Mul => add(mul(dl, r.clone()), mul(l, dr)),
                BinaryOp::Div => div(
                    sub(mul(dl, r.clone()), mul(l, dr)),
                    pow(r, c(2.0)),
                ),
                BinaryOp::Pow => {
                    if !r.depends_on(v) {
                        // p * l^(p-1) * l'
                        let p = r.clone();
                        let pm1 = match p.as_const() {
                            Some(k) => c(k - 1.0),
                            None => sub(p.clone(), c(1.0)),
                        };
                        mul(mul(p, pow(l, pm1)), dl)
                    } else if !l.depends_on(v) {
                        // l^r * log(l) * r'
                        mul(mul(e.clone(), un(UnaryOp::Log, l)), dr)
                    } else {
                        // l^r * (r' log(l) + r l'/l)
                        mul(
                            e.clone(),
                            add(
                                mul(dr, un(UnaryOp::Log, l.clone())),
                                div(mul(r, dl), l),
                            ),
                        )
                    }
                }
            }
        }
    }
}
