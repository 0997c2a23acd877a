//! Fit of the dichotomy constants `(M, omega)`.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use serde::Serialize;

use crate::evolution::Evolution;

use super::linalg::inf_norm;
use super::propagate::propagator_snapshots;
use super::DichotomyError;

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    /// Sample times lie in `[-window, window]`.
    pub window: f64,
    pub step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { window: 4.0, step: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub m: f64,
    pub omega: f64,
    /// Root mean square of the log-norm residuals.
    pub residual: f64,
    /// `(t - s, norm)` for every sampled pair.
    pub samples: Vec<(f64, f64)>,
}

/// Least-squares line through `(x, y)`: returns `(intercept, slope, rms)`.
pub fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (icpt, slope, rms)
}

/// Sup norms of `U(t,0) P U(0,s) + U(s,0) (I-P) U(0,t)` for `t >= s` on sampled
/// times, and the line fit of their logarithm against `t - s`.
pub fn decay_fit(evo: &Evolution<'_>, p: &Mat<f64>, cfg: &FitConfig) -> Result<DecayFit, DichotomyError> {
    let w = cfg.window;
    let h = cfg.step;
    if !(w > 0.0 && h > 0.0 && (w / h - (w / h).round()).abs() < 1e-9) {
        return Err(DichotomyError::Config(format!("fit window {w} must be a positive multiple of the step {h}")));
    }
    let k = (w / h).round() as usize;
    let fwd_times: Vec<f64> = (0..=k).map(|i| i as f64 * h).collect();
    let bwd_times: Vec<f64> = (0..=k).map(|i| -(i as f64) * h).collect();
    let fwd = propagator_snapshots(evo, 0.0, &fwd_times)?;
    let bwd = propagator_snapshots(evo, 0.0, &bwd_times)?;
    // times ascending with U(t, 0)
    let mut phi: Vec<(f64, Mat<f64>)> = bwd_times.iter().cloned().zip(bwd).skip(1).collect();
    phi.reverse();
    phi.extend(fwd_times.iter().cloned().zip(fwd));
    let psi: Vec<Mat<f64>> = phi.iter().map(|(_, m)| m.partial_piv_lu().inverse()).collect();
    let dim = p.nrows();
    let q = Mat::<f64>::identity(dim, dim) - p;
    let left: Vec<Mat<f64>> = phi.iter().map(|(_, m)| m * p).collect();
    let right: Vec<Mat<f64>> = phi.iter().map(|(_, m)| m * &q).collect();
    let mut samples = Vec::new();
    for (it, (t, _)) in phi.iter().enumerate() {
        for (is, (s, _)) in phi.iter().enumerate().take(it + 1) {
            let a = &left[it] * &psi[is];
            let b = &right[is] * &psi[it];
            samples.push((t - s, inf_norm(&a) + inf_norm(&b)));
        }
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(g, v)| (g, v.max(f64::MIN_POSITIVE).ln())).collect();
    let (icpt, slope, residual) = line_fit(&pts);
    Ok(DecayFit { m: icpt.exp(), omega: -slope, residual, samples })
}
