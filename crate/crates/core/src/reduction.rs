//! First-order form of `u_tt - a^2 u_xx + a1 u_t + a2 u_x = 0`.
//!
//! With `u1 = u_t + a u_x` and `u2 = u_t - a u_x` the equation becomes a 2x2
//! system with speeds `(-a, a)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{Coefficient, HyperbolicSystem, SamplingConfig, SystemError};
use crate::conditions::Verdict;
use crate::expr::{add, div, mul, neg, sub, Expr, ParseError, Var};

fn default_window() -> f64 {
    10.0
}

/// JSON form of the second-order equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderDoc {
    pub a: String,
    pub a1: String,
    pub a2: String,
    /// Zero-order coefficient; only an identically zero term is accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a3: Option<String>,
    #[serde(default = "default_window")]
    pub sample_window: f64,
}

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("cannot parse {coeff}: {source}")]
    Parse { coeff: &'static str, source: ParseError },
    #[error(
        "a nonzero zero-order term a3 is not supported: the reduced system is no longer \
         of the first-order form handled here"
    )]
    ZeroOrderTerm,
    #[error("a must be a finite nonzero number, got {0}")]
    Speed(f64),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderEq {
    pub a: Expr,
    pub a1: Expr,
    pub a2: Expr,
}

impl SecondOrderEq {
    pub fn from_doc(doc: &SecondOrderDoc) -> Result<Self, ReductionError> {
        let p = |coeff: &'static str, s: &str| Expr::parse(s).map_err(|source| ReductionError::Parse { coeff, source });
        if let Some(a3) = &doc.a3 {
            let e = p("a3", a3)?;
            if e.fold_constants().as_const() != Some(0.0) {
                return Err(ReductionError::ZeroOrderTerm);
            }
        }
        Ok(SecondOrderEq { a: p("a", &doc.a)?, a1: p("a1", &doc.a1)?, a2: p("a2", &doc.a2)? })
    }
}

fn half(e: Expr) -> Expr {
    div(e, Expr::constant(2.0))
}

/// Speeds and coupling matrix of the reduced system as expressions.
pub fn reduced_coefficients(eq: &SecondOrderEq) -> ([Expr; 2], [[Expr; 2]; 2]) {
    let a = eq.a.clone();
    let ax = a.diff(Var::X);
    let at = a.diff(Var::T);
    let two_a = mul(Expr::constant(2.0), a.clone());
    let p = half(eq.a1.clone());
    let q = div(eq.a2.clone(), two_a.clone());
    let aax = mul(a.clone(), ax);
    let minus = div(sub(aax.clone(), at.clone()), two_a.clone());
    let plus = div(add(aax, at), two_a);
    let b11 = add(add(p.clone(), q.clone()), minus.clone());
    // minus sign on the last term: this is what makes (u1, u2) solve the system
    let b12 = sub(sub(p.clone(), q.clone()), minus);
    let b21 = add(add(p.clone(), q.clone()), plus.clone());
    let b22 = sub(sub(p, q), plus);
    let fold = |e: Expr| e.fold_constants();
    ([fold(neg(a.clone())), fold(a)], [[fold(b11), fold(b12)], [fold(b21), fold(b22)]])
}

/// Reduced first-order system, validated like any other input.
pub fn reduce(eq: &SecondOrderEq, window: f64) -> Result<HyperbolicSystem, ReductionError> {
    // the couplings divide by a, so hyperbolicity is checked on a alone first
    HyperbolicSystem::from_coefficients(
        vec![Coefficient::from_expr(eq.a.clone())],
        vec![vec![Coefficient::from_expr(Expr::constant(0.0))]],
        window,
        &SamplingConfig::default(),
    )?;
    let (speeds, b) = reduced_coefficients(eq);
    let a = speeds.into_iter().map(Coefficient::from_expr).collect();
    let b = b.into_iter().map(|row| row.into_iter().map(Coefficient::from_expr).collect()).collect();
    Ok(HyperbolicSystem::from_coefficients(a, b, window, &SamplingConfig::default())?)
}

pub fn reduce_doc(doc: &SecondOrderDoc) -> Result<HyperbolicSystem, ReductionError> {
    reduce(&SecondOrderEq::from_doc(doc)?, doc.sample_window)
}

/// One conditional inequality `lhs < rhs if guard > 0`.
#[derive(Debug, Clone, Serialize)]
pub struct TrichotomyBranch {
    pub branch: usize,
    /// Component of the reduced system the branch refers to (1-based).
    pub component: usize,
    pub guard: f64,
    pub applicable: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrichotomyReport {
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub branches: Vec<TrichotomyBranch>,
    /// Margin of the branch deciding each component.
    pub margins: [f64; 2],
    pub verdicts: [Verdict; 2],
    pub verdict: Verdict,
}

/// Constant-coefficient inequalities for the reduced system, branch by branch.
pub fn trichotomy_const_check(a: f64, a1: f64, a2: f64) -> Result<TrichotomyReport, ReductionError> {
    if !(a.is_finite() && a != 0.0) {
        return Err(ReductionError::Speed(a));
    }
    let (p, m) = (a * a1 + a2, a * a1 - a2);
    let a2sq = 2.0 * a * a;
    let mk = |branch, component, guard: f64, lhs: f64, rhs: f64| TrichotomyBranch {
        branch,
        component,
        guard,
        applicable: guard > 0.0,
        lhs,
        rhs,
        margin: rhs - lhs,
    };
    let branches = vec![
        mk(1, 1, p, m.abs(), p),
        mk(2, 2, -m, p.abs(), -m),
        mk(3, 1, -p, m.abs(), 2.0 * (-p) * ((-p / a2sq).exp() - 1.0)),
        mk(4, 2, m, p.abs(), 2.0 * m * ((m / a2sq).exp() - 1.0)),
    ];
    let mut margins = [0.0; 2];
    let mut verdicts = [Verdict::Fail; 2];
    for c in 0..2 {
        // a vanishing guard leaves no applicable branch; the first one is reported
        let own: Vec<&TrichotomyBranch> = branches.iter().filter(|b| b.component == c + 1).collect();
        let pick = own.iter().find(|b| b.applicable).unwrap_or(&own[0]);
        margins[c] = pick.margin;
        verdicts[c] = if pick.applicable && pick.margin > 0.0 { Verdict::Pass } else { Verdict::Fail };
    }
    let verdict = if verdicts.iter().all(|v| *v == Verdict::Pass) { Verdict::Pass } else { Verdict::Fail };
    Ok(TrichotomyReport { a, a1, a2, branches, margins, verdicts, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(a: &str, a1: &str, a2: &str) -> SecondOrderEq {
        SecondOrderEq::from_doc(&SecondOrderDoc {
            a: a.into(),
            a1: a1.into(),
            a2: a2.into(),
            a3: None,
            sample_window: 10.0,
        })
        .unwrap()
    }

    #[test]
    fn constant_reduction() {
        let (s, b) = reduced_coefficients(&eq("1", "3", "1"));
        assert_eq!(s[0].as_const(), Some(-1.0));
        assert_eq!(s[1].as_const(), Some(1.0));
        let vals: Vec<Option<f64>> = b.iter().flatten().map(|e| e.as_const()).collect();
        assert_eq!(vals, vec![Some(2.0), Some(1.0), Some(2.0), Some(1.0)]);
        let (_, b) = reduced_coefficients(&eq("1", "0", "0"));
        assert!(b.iter().flatten().all(|e| e.as_const() == Some(0.0)));
    }

    #[test]
    fn variable_speed_terms_match_finite_differences() {
        let e = eq("1+0.1*sin(2*pi*x)", "0.7", "-0.4");
        let (_, b) = reduced_coefficients(&e);
        let a = |x: f64| 1.0 + 0.1 * (2.0 * std::f64::consts::PI * x).sin();
        let h = 1e-5;
        for &x in &[0.0, 0.13, 0.5, 0.77] {
            let ax = (a(x + h) - a(x - h)) / (2.0 * h);
            let (p, q) = (0.35, -0.4 / (2.0 * a(x)));
            let d = a(x) * ax / (2.0 * a(x));
            let want = [[p + q + d, p - q - d], [p + q + d, p - q - d]];
            for j in 0..2 {
                for k in 0..2 {
                    let got = b[j][k].eval(x, 0.3).unwrap();
                    assert!((got - want[j][k]).abs() < 1e-6, "b{j}{k} at {x}");
                }
            }
        }
    }

    #[test]
    fn zero_order_term_is_rejected() {
        let doc = SecondOrderDoc {
            a: "1".into(),
            a1: "0".into(),
            a2: "0".into(),
            a3: Some("x".into()),
            sample_window: 10.0,
        };
        assert!(matches!(SecondOrderEq::from_doc(&doc), Err(ReductionError::ZeroOrderTerm)));
        let doc = SecondOrderDoc { a3: Some("0".into()), ..doc };
        assert!(SecondOrderEq::from_doc(&doc).is_ok());
    }

    #[test]
    fn vanishing_speed_fails_validation() {
        let r = reduce(&eq("sin(2*pi*x)", "0", "0"), 10.0);
        assert!(matches!(r, Err(ReductionError::System(SystemError::Hyperbolicity { .. }))));
    }

    #[test]
    fn printed_inequalities_at_the_anchor() {
        let r = trichotomy_const_check(1.0, 3.0, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.margins[0] - 2.0).abs() < 1e-12);
        let want = 4.0 * (1f64.exp() - 1.0) - 4.0;
        assert!((r.margins[1] - want).abs() < 1e-12);
        assert!((r.margins[1] - 2.873).abs() < 1e-3);
    }

    #[test]
    fn degenerate_and_mirrored_triples() {
        let r = trichotomy_const_check(1.0, 0.0, 0.0).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.margins, [0.0, 0.0]);
        assert!(r.branches.iter().all(|b| !b.applicable));

        let r = trichotomy_const_check(1.0, -3.0, -1.0).unwrap();
        let b3 = &r.branches[2];
        let b2 = &r.branches[1];
        assert!(b3.applicable && b2.applicable);
        assert!((b3.margin - (8.0 * (2f64.exp() - 1.0) - 2.0)).abs() < 1e-12);
        assert!((b2.margin - (2.0 - 4.0)).abs() < 1e-12);
        assert_eq!(r.verdicts, [Verdict::Pass, Verdict::Fail]);
    }
}
