//! Coefficient matrices of a system and their validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{periodicity_defect, EvalError, Expr, ExprError, ParseError, Var};

fn default_window() -> f64 {
    10.0
}

/// Serialized form of a first-order system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub n: usize,
    pub a: Vec<String>,
    pub b: Vec<Vec<String>>,
    #[serde(default = "default_window")]
    pub sample_window: f64,
}

/// Sampling used when validating coefficients.
#[derive(Debug, Clone, Copy)]
pub struct SamplingConfig {
    pub n_x: usize,
    pub n_t: usize,
    pub periodicity_tol: f64,
    /// `|a_j|` at or below this value counts as a loss of hyperbolicity.
    pub hyperbolicity_floor: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { n_x: 257, n_t: 257, periodicity_tol: 1e-9, hyperbolicity_floor: 1e-12 }
    }
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("system must have n >= 1")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sample window must be positive and finite, got {0}")]
    Window(f64),
    #[error("cannot parse {coeff}: {source}")]
    Parse { coeff: String, source: ParseError },
    #[error("{coeff} cannot be evaluated at x={x}, t={t}: {source}")]
    Eval { coeff: String, x: f64, t: f64, source: EvalError },
    #[error("{coeff} is not 1-periodic in x (defect {defect:e})")]
    NotPeriodic { coeff: String, defect: f64 },
    #[error("a_{component} vanishes: |a| = {value:e} at x={x}, t={t}")]
    Hyperbolicity { component: usize, x: f64, t: f64, value: f64 },
    #[error("a_{component} changes sign: positive at {positive:?}, negative at {negative:?}")]
    SignChange { component: usize, positive: (f64, f64), negative: (f64, f64) },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Parsed coefficient with its source text.
#[derive(Debug, Clone)]
pub struct Coefficient {
    source: String,
    expr: Expr,
}

impl Coefficient {
    pub fn parse(label: &str, source: &str) -> Result<Self, SystemError> {
        let expr = Expr::parse(source)
            .map_err(|e| SystemError::Parse { coeff: label.to_string(), source: e })?
            .fold_constants();
        Ok(Coefficient { source: source.to_string(), expr })
    }

    pub fn from_expr(expr: Expr) -> Self {
        Coefficient { source: expr.to_string(), expr: expr.fold_constants() }
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        self.expr.eval(x, t)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_zero(&self) -> bool {
        self.expr.as_const() == Some(0.0)
    }
}

/// Sign pattern of the speeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedSignature {
    /// Number of components with positive speed.
    pub m: usize,
    /// `+1` or `-1` per component, in input order.
    pub signs: Vec<i8>,
    /// Input indices ordered positive speeds first (stable).
    pub order: Vec<usize>,
    /// Inflow boundary point per component: 0 for positive speed, 1 otherwise.
    pub inflow: Vec<f64>,
}

impl SpeedSignature {
    fn from_signs(signs: Vec<i8>) -> Self {
        let mut order: Vec<usize> = (0..signs.len()).filter(|&j| signs[j] > 0).collect();
        order.extend((0..signs.len()).filter(|&j| signs[j] < 0));
        let m = signs.iter().filter(|&&s| s > 0).count();
        let inflow = signs.iter().map(|&s| if s > 0 { 0.0 } else { 1.0 }).collect();
        SpeedSignature { m, signs, order, inflow }
    }

    /// Inverse of `order`: position of each input index.
    pub fn inverse_order(&self) -> Vec<usize> {
        let mut inv = vec![0; self.order.len()];
        for (p, &j) in self.order.iter().enumerate() {
            inv[j] = p;
        }
        inv
    }
}

/// Validated system `u_t + A u_x + B u = 0`.
#[derive(Debug, Clone)]
pub struct HyperbolicSystem {
    n: usize,
    a: Vec<Coefficient>,
    a_t: Vec<Expr>,
    b: Vec<Vec<Coefficient>>,
    sample_window: f64,
    signature: SpeedSignature,
}

fn sample_times(window: f64, n_t: usize) -> Vec<f64> {
    if n_t <= 1 {
        return vec![0.0];
    }
    (0..n_t)
        .map(|k| -window + 2.0 * window * k as f64 / (n_t - 1) as f64)
        .collect()
}

fn sample_xs(n_x: usize) -> Vec<f64> {
    if n_x <= 1 {
        return vec![0.0];
    }
    (0..n_x).map(|i| i as f64 / (n_x - 1) as f64).collect()
}

impl HyperbolicSystem {
    pub fn from_doc(doc: &SystemDoc, cfg: &SamplingConfig) -> Result<Self, SystemError> {
        let n = doc.n;
        if n == 0 {
            return Err(SystemError::Empty);
        }
        if doc.a.len() != n {
            return Err(SystemError::Shape(format!("a has {} entries, n = {n}", doc.a.len())));
        }
        if doc.b.len() != n || doc.b.iter().any(|r| r.len() != n) {
            return Err(SystemError::Shape(format!("b must be {n} x {n}")));
        }
        if !(doc.sample_window.is_finite() && doc.sample_window > 0.0) {
            return Err(SystemError::Window(doc.sample_window));
        }
        let a = doc
            .a
            .iter()
            .enumerate()
            .map(|(j, s)| Coefficient::parse(&format!("a_{}", j + 1), s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut b = Vec::with_capacity(n);
        for (j, row) in doc.b.iter().enumerate() {
            b.push(
                row.iter()
                    .enumerate()
                    .map(|(k, s)| Coefficient::parse(&format!("b_{}{}", j + 1, k + 1), s))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        Self::build(a, b, doc.sample_window, cfg)
    }

    /// Builds a system from coefficient strings with default sampling.
    pub fn from_strings(a: &[&str], b: &[&[&str]], window: f64) -> Result<Self, SystemError> {
        let doc = SystemDoc {
            n: a.len(),
            a: a.iter().map(|s| s.to_string()).collect(),
            b: b.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            sample_window: window,
        };
        Self::from_doc(&doc, &SamplingConfig::default())
    }

    pub fn from_coefficients(
        a: Vec<Coefficient>,
        b: Vec<Vec<Coefficient>>,
        window: f64,
        cfg: &SamplingConfig,
    ) -> Result<Self, SystemError> {
        let n = a.len();
        if n == 0 {
            return Err(SystemError::Empty);
        }
        if b.len() != n || b.iter().any(|r| r.len() != n) {
            return Err(SystemError::Shape(format!("b must be {n} x {n}")));
        }
        if !(window.is_finite() && window > 0.0) {
            return Err(SystemError::Window(window));
        }
        Self::build(a, b, window, cfg)
    }

    fn build(
        a: Vec<Coefficient>,
        b: Vec<Vec<Coefficient>>,
        window: f64,
        cfg: &SamplingConfig,
    ) -> Result<Self, SystemError> {
        let n = a.len();
        let ts = sample_times(window, cfg.n_t);
        let xs = sample_xs(cfg.n_x);
        let n_per = cfg.n_x.saturating_sub(1).max(16);

        let mut labelled: Vec<(String, &Coefficient)> = Vec::new();
        for (j, c) in a.iter().enumerate() {
            labelled.push((format!("a_{}", j + 1), c));
        }
        for (j, row) in b.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                labelled.push((format!("b_{}{}", j + 1, k + 1), c));
            }
        }
        for (label, c) in &labelled {
            if !c.expr.depends_on(Var::X) || c.expr.as_const().is_some() {
                // still evaluate once to surface domain errors
                for &t in &ts {
                    c.eval(0.0, t).map_err(|e| SystemError::Eval {
                        coeff: label.clone(),
                        x: 0.0,
                        t,
                        source: e,
                    })?;
                }
                continue;
            }
            let mut scale = 0.0f64;
            for &t in &ts {
                for &x in &xs {
                    let v = c.eval(x, t).map_err(|e| SystemError::Eval {
                        coeff: label.clone(),
                        x,
                        t,
                        source: e,
                    })?;
                    scale = scale.max(v.abs());
                }
            }
            let defect = periodicity_defect(&c.expr, &ts, n_per).map_err(|e| match e {
                ExprError::Eval(source) => SystemError::Eval {
                    coeff: label.clone(),
                    x: f64::NAN,
                    t: f64::NAN,
                    source,
                },
                other => other.into(),
            })?;
            if defect > cfg.periodicity_tol * (1.0 + scale) {
                return Err(SystemError::NotPeriodic { coeff: label.clone(), defect });
            }
        }

        let mut signs = Vec::with_capacity(n);
        for (j, c) in a.iter().enumerate() {
            let mut min_abs = (f64::INFINITY, 0.0, 0.0);
            let mut pos = None;
            let mut neg = None;
            for &t in &ts {
                for &x in &xs {
                    let v = c.eval(x, t).map_err(|e| SystemError::Eval {
                        coeff: format!("a_{}", j + 1),
                        x,
                        t,
                        source: e,
                    })?;
                    if v.abs() < min_abs.0 {
                        min_abs = (v.abs(), x, t);
                    }
                    if v > 0.0 && pos.is_none() {
                        pos = Some((x, t));
                    }
                    if v < 0.0 && neg.is_none() {
                        neg = Some((x, t));
                    }
                }
            }
            if min_abs.0 <= cfg.hyperbolicity_floor {
                return Err(SystemError::Hyperbolicity {
                    component: j + 1,
                    x: min_abs.1,
                    t: min_abs.2,
                    value: min_abs.0,
                });
            }
            match (pos, neg) {
                (Some(p), Some(q)) => {
                    return Err(SystemError::SignChange { component: j + 1, positive: p, negative: q })
                }
                (Some(_), None) => signs.push(1),
                _ => signs.push(-1),
            }
        }

        let a_t = a.iter().map(|c| c.expr.diff(Var::T).fold_constants()).collect();
        Ok(HyperbolicSystem {
            n,
            a,
            a_t,
            b,
            sample_window: window,
            signature: SpeedSignature::from_signs(signs),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn a(&self, j: usize, x: f64, t: f64) -> Result<f64, EvalError> {
        self.a[j].eval(x, t)
    }

    #[inline]
    pub fn a_t(&self, j: usize, x: f64, t: f64) -> Result<f64, EvalError> {
        self.a_t[j].eval(x, t)
    }

    #[inline]
    pub fn b(&self, j: usize, k: usize, x: f64, t: f64) -> Result<f64, EvalError> {
        self.b[j][k].eval(x, t)
    }

    pub fn a_coeff(&self, j: usize) -> &Coefficient {
        &self.a[j]
    }

    pub fn b_coeff(&self, j: usize, k: usize) -> &Coefficient {
        &self.b[j][k]
    }

    pub fn sample_window(&self) -> f64 {
        self.sample_window
    }

    pub fn signature(&self) -> &SpeedSignature {
        &self.signature
    }

    /// Whether `b_jk` vanishes identically (as an expression) for all `k != j`.
    pub fn is_decoupled(&self) -> bool {
        (0..self.n).all(|j| (0..self.n).all(|k| j == k || self.b[j][k].is_zero()))
    }

    /// No coefficient depends on `t`.
    pub fn is_autonomous(&self) -> bool {
        self.a.iter().chain(self.b.iter().flatten()).all(|c| !c.expr.depends_on(Var::T))
    }

    /// Every coefficient is a constant.
    pub fn is_constant(&self) -> bool {
        self.a.iter().chain(self.b.iter().flatten()).all(|c| c.expr.as_const().is_some())
    }

    pub fn to_doc(&self) -> SystemDoc {
        SystemDoc {
            n: self.n,
            a: self.a.iter().map(|c| c.source.clone()).collect(),
            b: self.b.iter().map(|r| r.iter().map(|c| c.source.clone()).collect()).collect(),
            sample_window: self.sample_window,
        }
    }
}

/// Validates a system document with default sampling.
pub fn validate_system(doc: &SystemDoc) -> Result<HyperbolicSystem, SystemError> {
    HyperbolicSystem::from_doc(doc, &SamplingConfig::default())
}

/// Sampled bounds of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentExtrema {
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    /// Largest off-diagonal absolute row sum `sum_{k != j} |b_jk|`.
    pub beta_off: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremaReport {
    pub components: Vec<ComponentExtrema>,
    pub sup_abs_a: f64,
    pub sup_abs_b: f64,
    pub n_x: usize,
    pub n_t: usize,
    /// Largest relative change of any bound between the last two sampling levels.
    pub refinement_change: f64,
    pub warnings: Vec<String>,
}

struct RawExtrema {
    comps: Vec<ComponentExtrema>,
    sup_abs_b: f64,
}

fn sample_extrema(
    sys: &HyperbolicSystem,
    xs: &[f64],
    ts: &[f64],
) -> Result<RawExtrema, SystemError> {
    let n = sys.n;
    let per_time: Vec<Result<RawExtrema, SystemError>> = ts
        .par_iter()
        .map(|&t| {
            let mut comps = vec![
                ComponentExtrema {
                    alpha_minus: f64::INFINITY,
                    alpha_plus: f64::NEG_INFINITY,
                    beta_minus: f64::INFINITY,
                    beta_plus: f64::NEG_INFINITY,
                    beta_off: 0.0,
                };
                n
            ];
            let mut sup_b = 0.0f64;
            for &x in xs {
                for j in 0..n {
                    let ev = |c: &Coefficient, label: String| {
                        c.eval(x, t).map_err(|e| SystemError::Eval { coeff: label, x, t, source: e })
                    };
                    let aj = ev(&sys.a[j], format!("a_{}", j + 1))?;
                    let c = &mut comps[j];
                    c.alpha_minus = c.alpha_minus.min(aj);
                    c.alpha_plus = c.alpha_plus.max(aj);
                    let mut off = 0.0;
                    for k in 0..n {
                        let v = ev(&sys.b[j][k], format!("b_{}{}", j + 1, k + 1))?;
                        sup_b = sup_b.max(v.abs());
                        if k == j {
                            c.beta_minus = c.beta_minus.min(v);
                            c.beta_plus = c.beta_plus.max(v);
                        } else {
                            off += v.abs();
                        }
                    }
                    c.beta_off = c.beta_off.max(off);
                }
            }
            Ok(RawExtrema { comps, sup_abs_b: sup_b })
        })
        .collect();
    let mut acc: Option<RawExtrema> = None;
    for r in per_time {
        let r = r?;
        acc = Some(match acc {
            None => r,
            Some(mut a) => {
                for (c, d) in a.comps.iter_mut().zip(&r.comps) {
                    c.alpha_minus = c.alpha_minus.min(d.alpha_minus);
                    c.alpha_plus = c.alpha_plus.max(d.alpha_plus);
                    c.beta_minus = c.beta_minus.min(d.beta_minus);
                    c.beta_plus = c.beta_plus.max(d.beta_plus);
                    c.beta_off = c.beta_off.max(d.beta_off);
                }
                a.sup_abs_b = a.sup_abs_b.max(r.sup_abs_b);
                a
            }
        });
    }
    Ok(acc.expect("at least one sample time"))
}

fn rel_change(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Samples `alpha^-`, `alpha^+`, `beta^-`, `beta^+` and `beta_j` over one
/// spatial period and the sampling window.
///
/// The grid is `n_x` points on `[0, 1]` and `n_t` points on the window, both
/// including the end points. A second pass on the nested grid with twice the
/// resolution is reported; a relative change above `1e-3` produces a warning.
pub fn compute_extrema(
    sys: &HyperbolicSystem,
    n_x: usize,
    n_t: usize,
) -> Result<ExtremaReport, SystemError> {
    let n_t = if sys.is_autonomous() { 1 } else { n_t.max(2) };
    let n_x = n_x.max(2);
    let w = sys.sample_window;
    let coarse = sample_extrema(sys, &sample_xs(n_x), &sample_times(w, n_t))?;
    let (fx, ft) = (2 * n_x - 1, if n_t == 1 { 1 } else { 2 * n_t - 1 });
    let fine = sample_extrema(sys, &sample_xs(fx), &sample_times(w, ft))?;

    let mut change = rel_change(coarse.sup_abs_b, fine.sup_abs_b);
    for (c, f) in coarse.comps.iter().zip(&fine.comps) {
        for (p, q) in [
            (c.alpha_minus, f.alpha_minus),
            (c.alpha_plus, f.alpha_plus),
            (c.beta_minus, f.beta_minus),
            (c.beta_plus, f.beta_plus),
            (c.beta_off, f.beta_off),
        ] {
            change = change.max(rel_change(p, q));
        }
    }
    let mut warnings = Vec::new();
    if change > 1e-3 {
        warnings.push(format!(
            "extrema moved by {change:.3e} (relative) under grid refinement; increase sampling"
        ));
    }
    if !sys.is_autonomous() {
        // crude growth probe beyond the sampling window
        let xs = sample_xs(33);
        let probe = |t: f64| -> f64 {
            let mut m = 0.0f64;
            for &x in &xs {
                for c in sys.a.iter().chain(sys.b.iter().flatten()) {
                    if let Ok(v) = c.eval(x, t) {
                        m = m.max(v.abs());
                    } else {
                        m = f64::INFINITY;
                    }
                }
            }
            m
        };
        let inside = probe(-w).max(probe(w)).max(probe(0.0));
        let outside = probe(-2.0 * w).max(probe(2.0 * w));
        if !(outside <= 10.0 * inside.max(1.0)) {
            warnings.push(format!(
                "coefficients grow outside the sampling window (|c| = {outside:.3e} at |t| = {}); they may be unbounded",
                2.0 * w
            ));
        }
    }
    let sup_abs_a = fine
        .comps
        .iter()
        .map(|c| c.alpha_minus.abs().max(c.alpha_plus.abs()))
        .fold(0.0, f64::max);
    Ok(ExtremaReport {
        components: fine.comps,
        sup_abs_a,
        sup_abs_b: fine.sup_abs_b,
        n_x: fx,
        n_t: ft,
        refinement_change: change,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_speed_extrema() {
        let sys = HyperbolicSystem::from_strings(
            &["1 + 0.5*sin(2*pi*x)", "-2"],
            &[&["-1", "0.1"], &["0.2*cos(2*pi*t)", "1"]],
            10.0,
        )
        .unwrap();
        let r = compute_extrema(&sys, 257, 257).unwrap();
        let c = &r.components[0];
        assert!((c.alpha_minus - 0.5).abs() < 1e-12);
        assert!((c.alpha_plus - 1.5).abs() < 1e-12);
        assert!((c.beta_minus + 1.0).abs() < 1e-15);
        assert!((c.beta_off - 0.1).abs() < 1e-15);
        assert!((r.components[1].beta_off - 0.2).abs() < 1e-12);
        assert_eq!(sys.signature().m, 1);
        assert_eq!(sys.signature().inflow, vec![0.0, 1.0]);
    }

    #[test]
    fn vanishing_speed_rejected() {
        let err = HyperbolicSystem::from_strings(&["sin(2*pi*x)"], &[&["0"]], 1.0).unwrap_err();
        assert!(matches!(err, SystemError::Hyperbolicity { component: 1, .. }), "{err}");
    }

    #[test]
    fn sign_change_rejected() {
        let err = HyperbolicSystem::from_strings(&["0.5 + sin(2*pi*x)"], &[&["0"]], 1.0).unwrap_err();
        assert!(matches!(err, SystemError::SignChange { .. }), "{err}");
    }

    #[test]
    fn non_periodic_rejected() {
        let err = HyperbolicSystem::from_strings(&["2 + x"], &[&["0"]], 1.0).unwrap_err();
        assert!(matches!(err, SystemError::NotPeriodic { .. }), "{err}");
    }

    #[test]
    fn parse_error_names_coefficient() {
        let err = HyperbolicSystem::from_strings(&["1"], &[&["sin(x"]], 1.0).unwrap_err();
        assert!(err.to_string().contains("b_11"), "{err}");
    }

    #[test]
    fn signature_order_positive_first() {
        let sys = HyperbolicSystem::from_strings(
            &["-1", "2", "-3", "1"],
            &[&["0"; 4], &["0"; 4], &["0"; 4], &["0"; 4]],
            1.0,
        )
        .unwrap();
        let s = sys.signature();
        assert_eq!(s.order, vec![1, 3, 0, 2]);
        assert_eq!(s.m, 2);
        let inv = s.inverse_order();
        for j in 0..4 {
            assert_eq!(s.order[inv[j]], j);
        }
    }
}
