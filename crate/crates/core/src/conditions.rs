//! Explicit sufficient conditions for an exponential dichotomy and for
//! uniqueness of bounded solutions, evaluated on sampled coefficient bounds.

use serde::Serialize;
use thiserror::Error;

use crate::characteristics::{self, CharConfig, CharError};
use crate::coefficients::{ComponentExtrema, ExtremaReport, HyperbolicSystem};
use crate::expr::{EvalError, Expr, ParseError};

/// Sign pattern of speed and diagonal damping of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignCase {
    /// `a_j > 0`, `b_jj > 0`.
    PP,
    /// `a_j < 0`, `b_jj < 0`.
    MM,
    /// `a_j > 0`, `b_jj < 0`.
    PM,
    /// `a_j < 0`, `b_jj > 0`.
    MP,
    /// `b_jj` vanishes or changes sign somewhere.
    #[serde(rename = "INDEFINITE")]
    Indefinite,
}

impl SignCase {
    pub fn classify(e: &ComponentExtrema) -> SignCase {
        let pos_speed = e.alpha_minus > 0.0;
        let neg_speed = e.alpha_plus < 0.0;
        if pos_speed && e.beta_minus > 0.0 {
            SignCase::PP
        } else if neg_speed && e.beta_plus < 0.0 {
            SignCase::MM
        } else if pos_speed && e.beta_plus < 0.0 {
            SignCase::PM
        } else if neg_speed && e.beta_minus > 0.0 {
            SignCase::MP
        } else {
            SignCase::Indefinite
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Error)]
pub enum ConditionError {
    #[error("a_j and b_jj must be nonzero, got a_j={a}, b_jj={b}")]
    ZeroInput { a: f64, b: f64 },
    #[error("component {0} has indefinite diagonal damping")]
    Indefinite(usize),
    #[error("extrema must satisfy alpha^- <= alpha^+ and beta^- <= beta^+")]
    Unordered,
    #[error("coefficient evaluation failed at x={x}, t={t}: {source}")]
    Eval { x: f64, t: f64, source: EvalError },
    #[error(transparent)]
    Char(#[from] CharError),
    #[error("cannot parse supplied factor for b_{j}{k}: {source}")]
    Factor { j: usize, k: usize, source: ParseError },
    #[error("invalid window [{0}, {1}]")]
    Window(f64, f64),
}

/// Threshold for constant coefficients: `|b|` when `a b > 0`, else
/// `|b| / (2 exp(-b/a) - 1)`.
pub fn remark_constant_thresholds(a: f64, b: f64) -> Result<f64, ConditionError> {
    if a == 0.0 || b == 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(ConditionError::ZeroInput { a, b });
    }
    if a * b > 0.0 {
        Ok(b.abs())
    } else {
        Ok(b.abs() / (2.0 * (-b / a).exp() - 1.0))
    }
}

fn ordered(e: &ComponentExtrema) -> Result<(), ConditionError> {
    if e.alpha_minus <= e.alpha_plus && e.beta_minus <= e.beta_plus {
        Ok(())
    } else {
        Err(ConditionError::Unordered)
    }
}

/// Upper bound for `beta_j` in the given case.
pub fn threshold(case: SignCase, e: &ComponentExtrema) -> Result<f64, ConditionError> {
    ordered(e)?;
    let (am, ap, bm, bp) = (e.alpha_minus, e.alpha_plus, e.beta_minus, e.beta_plus);
    Ok(match case {
        SignCase::PP => bm * am / ap,
        SignCase::MM => -bp * ap * (1.0 - (-bp / am).exp()) / (am * (1.0 - (-bp / ap).exp())),
        SignCase::PM => {
            let (p, q) = (bp / ap, bm / am);
            bm * (1.0 - p.exp()) / (1.0 - (-q).exp()) / ((p - q).exp() - p.exp() + 1.0)
        }
        SignCase::MP => {
            let (p, q) = (bp / ap, bm / am);
            -bp * (1.0 - q.exp()) / (1.0 - (-p).exp()) / ((q - p).exp() - q.exp() + 1.0)
        }
        SignCase::Indefinite => return Err(ConditionError::Indefinite(0)),
    })
}

/// Bound on the inverse of `I - C` restricted to component `j`.
pub fn lemma_iso_bound(case: SignCase, e: &ComponentExtrema) -> Result<f64, ConditionError> {
    ordered(e)?;
    let (am, ap, bm, bp) = (e.alpha_minus, e.alpha_plus, e.beta_minus, e.beta_plus);
    Ok(match case {
        SignCase::PP => 1.0 / (1.0 - (-bm / ap).exp()),
        SignCase::MM => 1.0 / (1.0 - (-bp / am).exp()),
        SignCase::PM => (bp / ap - bm / am).exp() / (1.0 - (bp / ap).exp()) + 1.0,
        SignCase::MP => (bm / am - bp / ap).exp() / (1.0 - (bm / am).exp()) + 1.0,
        SignCase::Indefinite => return Err(ConditionError::Indefinite(0)),
    })
}

/// Bound on component `j` of `D` in the sup norm.
pub fn d_bound(case: SignCase, e: &ComponentExtrema) -> Result<f64, ConditionError> {
    ordered(e)?;
    let (am, ap, bm, bp, bj) = (e.alpha_minus, e.alpha_plus, e.beta_minus, e.beta_plus, e.beta_off);
    if bj == 0.0 {
        return match case {
            SignCase::Indefinite => Err(ConditionError::Indefinite(0)),
            _ => Ok(0.0),
        };
    }
    Ok(match case {
        SignCase::PP => (bj / bm) * (ap / am) * (1.0 - (-bm / ap).exp()),
        SignCase::MM => -(bj / bp) * (am / ap) * (1.0 - (-bp / ap).exp()),
        SignCase::PM => (bj / bm) * (1.0 - (-bm / am).exp()),
        SignCase::MP => -(bj / bp) * (1.0 - (-bp / ap).exp()),
        SignCase::Indefinite => return Err(ConditionError::Indefinite(0)),
    })
}

/// Bound on component `j` of `(I - C)^{-1} D`.
pub fn lemma_dest_bound(case: SignCase, e: &ComponentExtrema) -> Result<f64, ConditionError> {
    Ok(d_bound(case, e)? * lemma_iso_bound(case, e)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentCondition {
    pub j: usize,
    pub case: SignCase,
    pub beta_j: f64,
    pub threshold: f64,
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayEntry {
    pub j: usize,
    pub k: usize,
    pub eps: f64,
    /// Smallest `c` with `|b_jk| < eps` for sampled `|t| > c`, when found.
    pub c: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorEntry {
    pub j: usize,
    pub k: usize,
    /// `zero`, `division` or `supplied`.
    pub method: &'static str,
    pub min_speed_gap: f64,
    /// Sample point of the smallest speed gap, reported on failure.
    pub location: Option<(f64, f64)>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayCouplingReport {
    pub sup_b_diag: f64,
    pub inf_b_diag: f64,
    pub k0: bool,
    pub k00: bool,
    pub window: (f64, f64),
    pub decay: Vec<DecayEntry>,
    pub factorization: Vec<FactorEntry>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub components: Vec<ComponentCondition>,
    pub verdict: Verdict,
    /// Present for reports produced by [`theorem2_check`].
    pub decay_coupling: Option<DecayCouplingReport>,
}

fn strict(margin: f64) -> Verdict {
    if margin > 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Checks `beta_j < threshold_j` for every component.
pub fn theorem3_check(sys: &HyperbolicSystem, ext: &ExtremaReport) -> Result<ConditionReport, ConditionError> {
    let _ = sys;
    let mut comps = Vec::with_capacity(ext.components.len());
    for (j, e) in ext.components.iter().enumerate() {
        let case = SignCase::classify(e);
        let rec = match case {
            SignCase::Indefinite => ComponentCondition {
                j: j + 1,
                case,
                beta_j: e.beta_off,
                threshold: 0.0,
                margin: f64::NEG_INFINITY,
                verdict: Verdict::Fail,
            },
            _ => {
                let th = threshold(case, e)?;
                let margin = th - e.beta_off;
                ComponentCondition { j: j + 1, case, beta_j: e.beta_off, threshold: th, margin, verdict: strict(margin) }
            }
        };
        comps.push(rec);
    }
    let verdict = if comps.iter().all(|c| c.verdict == Verdict::Pass) { Verdict::Pass } else { Verdict::Fail };
    Ok(ConditionReport { components: comps, verdict, decay_coupling: None })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    /// Per component bound on `(I - C)^{-1} D`, `inf` for indefinite components.
    pub bounds: Vec<f64>,
    pub max_bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Checks the contraction condition `|(I - C)^{-1} D| < 1` through the per
/// component bounds.
pub fn corollary_check(sys: &HyperbolicSystem, ext: &ExtremaReport) -> Result<CorollaryReport, ConditionError> {
    let _ = sys;
    let mut bounds = Vec::new();
    for e in &ext.components {
        let case = SignCase::classify(e);
        bounds.push(match case {
            SignCase::Indefinite => f64::INFINITY,
            _ => lemma_dest_bound(case, e)?,
        });
    }
    let max_bound = bounds.iter().cloned().fold(0.0, f64::max);
    let margin = 1.0 - max_bound;
    Ok(CorollaryReport { bounds, max_bound, margin, pass: margin > 0.0 })
}

/// Settings of [`theorem2_check`].
#[derive(Debug, Clone)]
pub struct DecayCouplingConfig {
    pub window: (f64, f64),
    pub eps_grid: Vec<f64>,
    pub n_x: usize,
    pub n_t: usize,
    /// Optional `b~_jk` with `b_jk = b~_jk (a_j - a_k)`, indexed `[j][k]`.
    pub factors: Option<Vec<Vec<Option<String>>>>,
}

impl Default for DecayCouplingConfig {
    fn default() -> Self {
        DecayCouplingConfig {
            window: (-10.0, 10.0),
            eps_grid: vec![1e-1, 1e-2, 1e-3],
            n_x: 257,
            n_t: 2001,
            factors: None,
        }
    }
}

fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn sup_over_x(xs: &[f64], f: impl Fn(f64) -> Result<f64, EvalError>, t: f64) -> Result<f64, ConditionError> {
    let mut m = 0.0f64;
    for &x in xs {
        m = m.max(f(x).map_err(|source| ConditionError::Eval { x, t, source })?.abs());
    }
    Ok(m)
}

/// Checks the decaying-coupling hypotheses on a finite window.
pub fn theorem2_check(
    sys: &HyperbolicSystem,
    ext: &ExtremaReport,
    cfg: &DecayCouplingConfig,
) -> Result<ConditionReport, ConditionError> {
    let (t0, t1) = cfg.window;
    if !(t0 < 0.0 && t1 > 0.0 && t0.is_finite() && t1.is_finite()) {
        return Err(ConditionError::Window(t0, t1));
    }
    let n = sys.n();
    let sup_b_diag = ext.components.iter().map(|c| c.beta_plus).fold(f64::NEG_INFINITY, f64::max);
    let inf_b_diag = ext.components.iter().map(|c| c.beta_minus).fold(f64::INFINITY, f64::min);
    let k0 = sup_b_diag < 0.0;
    let k00 = inf_b_diag > 0.0;

    let xs = lin(0.0, 1.0, cfg.n_x.max(2));
    let ts = lin(t0, t1, cfg.n_t.max(3));
    let mut decay = Vec::new();
    let mut factorization = Vec::new();
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let coeff = sys.b_coeff(j, k);
            let bjk = |x: f64, t: f64| coeff.eval(x, t);
            let profile: Vec<f64> = ts
                .iter()
                .map(|&t| sup_over_x(&xs, |x| bjk(x, t), t))
                .collect::<Result<_, _>>()?;
            let peak = profile.iter().cloned().fold(0.0, f64::max);
            let edge = profile[0].max(*profile.last().unwrap());
            for &eps in &cfg.eps_grid {
                let entry = if coeff.is_zero() {
                    DecayEntry { j: j + 1, k: k + 1, eps, c: Some(0.0), verdict: Verdict::Pass }
                } else if edge >= eps {
                    let verdict = if edge >= 0.5 * peak { Verdict::Fail } else { Verdict::Indeterminate };
                    DecayEntry { j: j + 1, k: k + 1, eps, c: None, verdict }
                } else {
                    let mut c = 0.0f64;
                    for (i, &t) in ts.iter().enumerate() {
                        if profile[i] < eps {
                            continue;
                        }
                        // refine the crossing towards larger |t|
                        let nb = if t < 0.0 { i.checked_sub(1) } else { Some(i + 1) };
                        let mut cross = t.abs();
                        if let Some(nb) = nb.filter(|&m| m < ts.len()) {
                            if profile[nb] < eps {
                                let (mut lo, mut hi) = (t, ts[nb]);
                                for _ in 0..50 {
                                    let mid = 0.5 * (lo + hi);
                                    if sup_over_x(&xs, |x| bjk(x, mid), mid)? >= eps {
                                        lo = mid;
                                    } else {
                                        hi = mid;
                                    }
                                }
                                cross = lo.abs();
                            }
                        }
                        c = c.max(cross);
                    }
                    DecayEntry { j: j + 1, k: k + 1, eps, c: Some(c), verdict: Verdict::Pass }
                };
                decay.push(entry);
            }

            // factorization through the speed difference
            let mut gap = (f64::INFINITY, 0.0, 0.0);
            for &t in &ts {
                for &x in &xs {
                    let d = (sys.a(j, x, t).map_err(|source| ConditionError::Eval { x, t, source })?
                        - sys.a(k, x, t).map_err(|source| ConditionError::Eval { x, t, source })?)
                        .abs();
                    if d < gap.0 {
                        gap = (d, x, t);
                    }
                }
            }
            let supplied = cfg
                .factors
                .as_ref()
                .and_then(|f| f.get(j))
                .and_then(|r| r.get(k))
                .and_then(|s| s.clone());
            let entry = if coeff.is_zero() {
                FactorEntry { j: j + 1, k: k + 1, method: "zero", min_speed_gap: gap.0, location: None, verdict: Verdict::Pass }
            } else if let Some(src) = supplied {
                let bt = Expr::parse(&src)
                    .map_err(|source| ConditionError::Factor { j: j + 1, k: k + 1, source })?
                    .fold_constants();
                let mut worst = (0.0f64, 0.0, 0.0);
                for &t in &ts {
                    for &x in &xs {
                        let ev = |r: Result<f64, EvalError>| r.map_err(|source| ConditionError::Eval { x, t, source });
                        let lhs = ev(bt.eval(x, t))? * (ev(sys.a(j, x, t))? - ev(sys.a(k, x, t))?);
                        let rhs = ev(bjk(x, t))?;
                        let d = (lhs - rhs).abs() / (1.0 + rhs.abs());
                        if d > worst.0 {
                            worst = (d, x, t);
                        }
                    }
                }
                let ok = worst.0 <= 1e-10;
                FactorEntry {
                    j: j + 1,
                    k: k + 1,
                    method: "supplied",
                    min_speed_gap: gap.0,
                    location: if ok { None } else { Some((worst.1, worst.2)) },
                    verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                }
            } else {
                let ok = gap.0 >= 1e-8;
                FactorEntry {
                    j: j + 1,
                    k: k + 1,
                    method: "division",
                    min_speed_gap: gap.0,
                    location: if ok { None } else { Some((gap.1, gap.2)) },
                    verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                }
            };
            factorization.push(entry);
        }
    }

    let any_fail = !(k0 || k00)
        || decay.iter().any(|d| d.verdict == Verdict::Fail)
        || factorization.iter().any(|f| f.verdict == Verdict::Fail);
    let any_indet = decay.iter().any(|d| d.verdict == Verdict::Indeterminate);
    let verdict = if any_fail {
        Verdict::Fail
    } else if any_indet {
        Verdict::Indeterminate
    } else {
        Verdict::Pass
    };
    let dc = DecayCouplingReport {
        sup_b_diag,
        inf_b_diag,
        k0,
        k00,
        window: cfg.window,
        decay,
        factorization,
        verdict,
    };
    Ok(ConditionReport { components: Vec::new(), verdict, decay_coupling: Some(dc) })
}

/// `int_{1-x_j}^{x_j} (b_jj / a_j)(eta, tau_j(eta; 1-x_j, t)) d eta` with
/// `x_j` the inflow point of component `j`.
pub fn uniqueness_integral(
    sys: &HyperbolicSystem,
    j: usize,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, ConditionError> {
    let xj = sys.signature().inflow[j];
    let start = 1.0 - xj;
    let path = characteristics::tau_path(sys, j, start, t, xj, cfg)?;
    Ok(characteristics::path_integral(&path, |e, s| Ok(sys.b(j, j, e, s)? / sys.a(j, e, s)?))?)
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessComponent {
    pub j: usize,
    /// Infimum over sampled `t < -T`.
    pub inf_before: f64,
    /// Supremum over sampled `t > T`.
    pub sup_after: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub t_threshold: f64,
    pub components: Vec<UniquenessComponent>,
    /// All `inf_before < 0`.
    pub star_one: Verdict,
    /// All `sup_after > 0`.
    pub star_two: Verdict,
}

const ZERO_BAND: f64 = 1e-12;

/// Samples the uniqueness integrals on `[-T - L, -T]` and `[T, T + L]`.
pub fn uniqueness_report(
    sys: &HyperbolicSystem,
    t_threshold: f64,
    span: f64,
    samples: usize,
    cfg: &CharConfig,
) -> Result<UniquenessReport, ConditionError> {
    let samples = samples.max(2);
    let before = lin(-t_threshold - span, -t_threshold, samples);
    let after = lin(t_threshold, t_threshold + span, samples);
    let mut comps = Vec::new();
    for j in 0..sys.n() {
        let mut inf_b = f64::INFINITY;
        for &t in &before {
            inf_b = inf_b.min(uniqueness_integral(sys, j, t, cfg)?);
        }
        let mut sup_a = f64::NEG_INFINITY;
        for &t in &after {
            sup_a = sup_a.max(uniqueness_integral(sys, j, t, cfg)?);
        }
        comps.push(UniquenessComponent { j: j + 1, inf_before: inf_b, sup_after: sup_a });
    }
    let judge = |vals: Vec<f64>| {
        if vals.iter().all(|&v| v > ZERO_BAND) {
            Verdict::Pass
        } else if vals.iter().all(|&v| v > -ZERO_BAND) {
            Verdict::Indeterminate
        } else {
            Verdict::Fail
        }
    };
    let star_one = judge(comps.iter().map(|c| -c.inf_before).collect());
    let star_two = judge(comps.iter().map(|c| c.sup_after).collect());
    Ok(UniquenessReport { t_threshold, components: comps, star_one, star_two })
}
