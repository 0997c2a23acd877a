//! Finite-time splitting for general time dependence.
//!
//! Right singular vectors of `U(L, 0)` with negative growth rate span the
//! candidate stable space at time 0; left singular vectors of `U(0, -L)` with
//! positive rate span the candidate unstable space. A projection exists when
//! the rates stay away from zero, the dimensions add up and the two spaces
//! are transversal.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use serde::Serialize;

use crate::evolution::Evolution;

use super::linalg::max_principal_angle;
use super::propagate::propagator;
use super::DichotomyError;

#[derive(Debug, Clone, Copy)]
pub struct SplittingConfig {
    /// Horizon `L` of the forward and backward maps.
    pub horizon: f64,
    /// Growth rates in `(-rate_gap, rate_gap)` leave the splitting undecided.
    pub rate_gap: f64,
    /// Smallest accepted singular value of `[V_s V_u]`.
    pub transversality: f64,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        SplittingConfig { horizon: 4.0, rate_gap: 0.1, transversality: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Splitting {
    pub horizon: f64,
    /// `ln sigma_i(U(L,0)) / L`, descending.
    pub forward_rates: Vec<f64>,
    /// `ln sigma_i(U(0,-L)) / L`, descending.
    pub backward_rates: Vec<f64>,
    pub stable_dim: usize,
    pub unstable_dim: usize,
    /// Smallest `|rate|` over both maps.
    pub rate_gap: f64,
    pub transversality: Option<f64>,
    pub reason: Option<String>,
    #[serde(skip)]
    pub projection: Option<Mat<f64>>,
}

fn rates(s: &[f64], horizon: f64) -> Vec<f64> {
    s.iter().map(|v| v.max(f64::MIN_POSITIVE).ln() / horizon).collect()
}

pub fn finite_time_splitting(evo: &Evolution<'_>, cfg: &SplittingConfig) -> Result<Splitting, DichotomyError> {
    let l = cfg.horizon;
    if !(l.is_finite() && l > 0.0) {
        return Err(DichotomyError::Config(format!("horizon must be positive, got {l}")));
    }
    let fwd = propagator(evo, l, 0.0)?;
    let bwd = propagator(evo, 0.0, -l)?;
    let err = |e| DichotomyError::Linalg(format!("singular value decomposition failed: {e:?}"));
    let sf = fwd.svd().map_err(err)?;
    let sb = bwd.svd().map_err(err)?;
    let fs: Vec<f64> = (0..sf.S().column_vector().nrows()).map(|i| sf.S().column_vector()[i]).collect();
    let bs: Vec<f64> = (0..sb.S().column_vector().nrows()).map(|i| sb.S().column_vector()[i]).collect();
    let forward_rates = rates(&fs, l);
    let backward_rates = rates(&bs, l);
    let dim = fwd.nrows();
    let stable: Vec<usize> = (0..dim).filter(|&i| forward_rates[i] <= -cfg.rate_gap).collect();
    let unstable: Vec<usize> = (0..dim).filter(|&i| backward_rates[i] >= cfg.rate_gap).collect();
    let gap = forward_rates
        .iter()
        .chain(&backward_rates)
        .map(|r| r.abs())
        .fold(f64::INFINITY, f64::min);
    let mut out = Splitting {
        horizon: l,
        forward_rates,
        backward_rates,
        stable_dim: stable.len(),
        unstable_dim: unstable.len(),
        rate_gap: gap,
        transversality: None,
        reason: None,
        projection: None,
    };
    if gap < cfg.rate_gap {
        out.reason = Some(format!("finite-time growth rate {gap:e} inside the gap {}", cfg.rate_gap));
        return Ok(out);
    }
    if stable.len() + unstable.len() != dim {
        out.reason = Some(format!(
            "stable and unstable dimensions {} + {} do not fill {dim}",
            stable.len(),
            unstable.len()
        ));
        return Ok(out);
    }
    let v = sf.V();
    let u = sb.U();
    let basis = Mat::<f64>::from_fn(dim, dim, |i, c| {
        if c < stable.len() {
            v[(i, stable[c])]
        } else {
            u[(i, unstable[c - stable.len()])]
        }
    });
    let smin = basis
        .singular_values()
        .map_err(err)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    out.transversality = Some(smin);
    if smin < cfg.transversality {
        out.reason = Some(format!("stable and unstable spaces are not transversal ({smin:e})"));
        return Ok(out);
    }
    let inv = basis.partial_piv_lu().inverse();
    let ks = stable.len();
    let left = Mat::<f64>::from_fn(dim, dim, |i, c| if c < ks { basis[(i, c)] } else { 0.0 });
    out.projection = Some(&left * &inv);
    Ok(out)
}

/// Largest angle between `U(t, 0) ran P` and `ran Q` for a projection `Q` at time `t`.
pub fn propagated_angle(evo: &Evolution<'_>, p: &Mat<f64>, q: &Mat<f64>, t: f64) -> Result<f64, DichotomyError> {
    let u = propagator(evo, t, 0.0)?;
    Ok(max_principal_angle(&(&u * p), q))
}
