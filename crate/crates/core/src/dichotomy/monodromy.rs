//! Spectral splitting of the period map `U(s + period, s)`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use crate::coefficients::HyperbolicSystem;
use crate::evolution::{Evolution, EvolutionConfig};

use super::linalg::{frob, matrix_sign, max_abs};
use super::propagate::propagator;
use super::{DichotomyError, DichotomyVerdict};

#[derive(Debug, Clone, Copy)]
pub struct MonodromyConfig {
    /// Eigenvalues with `||lambda| - 1| < gap_tol` rule out a dichotomy.
    pub gap_tol: f64,
    /// Base time `s` of the period map.
    pub start: f64,
}

impl Default for MonodromyConfig {
    fn default() -> Self {
        MonodromyConfig { gap_tol: 1e-2, start: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub arg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonodromyResult {
    pub period: f64,
    pub start: f64,
    pub n_points: usize,
    pub gap_tol: f64,
    /// Sorted by modulus.
    pub eigenvalues: Vec<Eigenvalue>,
    /// `min ||lambda| - 1|`.
    pub min_gap: f64,
    pub inside: usize,
    pub evidence: DichotomyVerdict,
    pub reason: Option<String>,
    #[serde(skip)]
    pub matrix: Mat<f64>,
    #[serde(skip)]
    pub projection: Option<Mat<f64>>,
}

impl MonodromyResult {
    /// Eigenvalue closest to `z`.
    pub fn nearest(&self, re: f64, im: f64) -> Option<Eigenvalue> {
        self.eigenvalues.iter().cloned().min_by(|a, b| {
            let da = (a.re - re).hypot(a.im - im);
            let db = (b.re - re).hypot(b.im - im);
            da.total_cmp(&db)
        })
    }

    /// Eigenvalues within `tol` of the unit circle.
    pub fn near_unit_circle(&self, tol: f64) -> Vec<Eigenvalue> {
        self.eigenvalues.iter().filter(|e| (e.modulus - 1.0).abs() < tol).cloned().collect()
    }
}

/// Real eigenvector for an eigenvalue near the real shift `mu`, by inverse iteration.
pub fn eigvec_near(a: &Mat<f64>, mu: f64) -> Option<Vec<f64>> {
    let n = a.nrows();
    let shift = mu + 1e-9 * mu.abs().max(1.0);
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)] - if i == j { shift } else { 0.0 });
    let lu = m.partial_piv_lu();
    let mut x = Mat::<f64>::from_fn(n, 1, |i, _| 1.0 + 0.01 * ((i * 7919) % 101) as f64);
    for _ in 0..30 {
        lu.solve_in_place(&mut x);
        let nx = frob(&x);
        if !(nx.is_finite() && nx > 0.0) {
            return None;
        }
        for i in 0..n {
            x[(i, 0)] /= nx;
        }
    }
    Some((0..n).map(|i| x[(i, 0)]).collect())
}

/// Angle between a vector and a reference direction, in radians.
pub fn angle(v: &[f64], reference: &[f64]) -> f64 {
    let dot: f64 = v.iter().zip(reference).map(|(a, b)| a * b).sum();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nr = reference.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot.abs() / (nv * nr)).min(1.0).acos()
}

/// Spectral projection onto the invariant subspace inside the unit circle.
///
/// Uses the sign of the Cayley transform `(A - I)^{-1} (A + I)`.
pub fn stable_projection(a: &Mat<f64>) -> Option<Mat<f64>> {
    let n = a.nrows();
    let id = Mat::<f64>::identity(n, n);
    let am = a - &id;
    let ap = a + &id;
    let z = am.partial_piv_lu().solve(&ap);
    if !(0..n).all(|i| (0..n).all(|j| z[(i, j)].is_finite())) {
        return None;
    }
    let s = matrix_sign(&z, 100)?;
    Some(Mat::from_fn(n, n, |i, j| 0.5 * (id[(i, j)] - s[(i, j)])))
}

pub fn monodromy_from_evolution(
    evo: &Evolution<'_>,
    period: f64,
    cfg: &MonodromyConfig,
) -> Result<MonodromyResult, DichotomyError> {
    if !(period.is_finite() && period > 0.0) {
        return Err(DichotomyError::Config(format!("period must be positive, got {period}")));
    }
    let a = propagator(evo, cfg.start + period, cfg.start)?;
    let ev = a.eigenvalues().map_err(|e| DichotomyError::Linalg(format!("eigenvalue solver failed: {e:?}")))?;
    let mut eigenvalues: Vec<Eigenvalue> = ev
        .iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im, modulus: z.re.hypot(z.im), arg: z.im.atan2(z.re) })
        .collect();
    eigenvalues.sort_by(|x, y| x.modulus.total_cmp(&y.modulus));
    let min_gap = eigenvalues.iter().map(|e| (e.modulus - 1.0).abs()).fold(f64::INFINITY, f64::min);
    let inside = eigenvalues.iter().filter(|e| e.modulus < 1.0).count();
    let mut reason = None;
    let (evidence, projection) = if min_gap < cfg.gap_tol {
        reason = Some(format!("eigenvalue within {min_gap:e} of the unit circle"));
        (DichotomyVerdict::NoDichotomy, None)
    } else {
        match stable_projection(&a) {
            None => {
                reason = Some("sign iteration for the spectral projection did not converge".into());
                (DichotomyVerdict::Indeterminate, None)
            }
            Some(p) => {
                let defect = max_abs(&(&p * &p - &p));
                let tr: f64 = (0..p.nrows()).map(|i| p[(i, i)]).sum();
                if defect > 1e-6 || (tr - inside as f64).abs() > 1e-6 {
                    reason = Some(format!(
                        "spectral projection is ill conditioned (idempotence {defect:e}, trace {tr})"
                    ));
                    (DichotomyVerdict::Indeterminate, Some(p))
                } else {
                    (DichotomyVerdict::Dichotomy, Some(p))
                }
            }
        }
    };
    Ok(MonodromyResult {
        period,
        start: cfg.start,
        n_points: evo.points(),
        gap_tol: cfg.gap_tol,
        eigenvalues,
        min_gap,
        inside,
        evidence,
        reason,
        matrix: a,
        projection,
    })
}

/// Monodromy matrix, eigenvalues and spectral projection on an `N`-point grid.
pub fn monodromy_projection(
    sys: &HyperbolicSystem,
    period: f64,
    n_points: usize,
    evo_cfg: Option<EvolutionConfig>,
    cfg: &MonodromyConfig,
) -> Result<MonodromyResult, DichotomyError> {
    let ecfg = evo_cfg.unwrap_or_else(|| EvolutionConfig::with_grid(n_points, 1.0 / n_points as f64));
    let ecfg = EvolutionConfig { n_points, ..ecfg };
    let evo = Evolution::new(sys, ecfg)?;
    monodromy_from_evolution(&evo, period, cfg)
}
