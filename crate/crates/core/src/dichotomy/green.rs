//! Bounded solution through the Green's function of a dichotomy.
//!
//! `G(t, s) = U(t,0) P U(0,s)` for `s < t` and `-U(t,0) (I-P) U(0,s)` for
//! `s > t`, integrated against the forcing with Simpson's rule on a window
//! of width `W` on each side of `t`.

use faer::Mat;
use serde::Serialize;

use crate::evolution::Evolution;
use crate::grid::GridFunction;

use super::propagate::apply_mat;
use super::DichotomyError;

#[derive(Debug, Clone, Copy)]
pub struct GreenConfig {
    pub window: f64,
    /// Simpson spacing in `s`; must be a multiple of the slab length.
    pub h: f64,
    pub tail_tol: f64,
    /// Dichotomy constants used for the tail bound.
    pub m: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenResult {
    pub t: f64,
    pub tail_bound: f64,
    pub nodes: usize,
    pub u: GridFunction,
}

/// `sum_k w_k U(0, s_k) f(s_k)`, propagating a running sum toward 0.
fn pull_to_origin(
    evo: &Evolution<'_>,
    nodes: &[(f64, f64)],
    f: &(dyn Fn(f64) -> GridFunction + Sync),
) -> Result<GridFunction, DichotomyError> {
    let mut total = evo.zeros();
    let mut below: Vec<(f64, f64)> = nodes.iter().cloned().filter(|n| n.0 < 0.0).collect();
    let mut above: Vec<(f64, f64)> = nodes.iter().cloned().filter(|n| n.0 >= 0.0).collect();
    below.sort_by(|a, b| a.0.total_cmp(&b.0));
    above.sort_by(|a, b| b.0.total_cmp(&a.0));
    for group in [below, above] {
        let Some(&(first, _)) = group.first() else { continue };
        let mut acc = evo.zeros();
        let mut cur = first;
        for &(s, w) in &group {
            if s != cur {
                acc = evo.apply(s, cur, &acc)?;
                cur = s;
            }
            acc.axpy(w, &f(s));
        }
        let acc = evo.apply(0.0, cur, &acc)?;
        total.axpy(1.0, &acc);
    }
    Ok(total)
}

fn simpson_nodes(a: f64, b: f64, h: f64) -> Vec<(f64, f64)> {
    let k = ((b - a) / h).round() as usize;
    let k = k + k % 2;
    let hh = (b - a) / k as f64;
    (0..=k)
        .map(|i| {
            let w = if i == 0 || i == k {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * hh, w * hh / 3.0)
        })
        .collect()
}

/// Bounded solution at time `t` for the forcing `f`.
pub fn greens_apply(
    evo: &Evolution<'_>,
    p: &Mat<f64>,
    f: &(dyn Fn(f64) -> GridFunction + Sync),
    t: f64,
    cfg: &GreenConfig,
) -> Result<GreenResult, DichotomyError> {
    if !(cfg.omega > 0.0) {
        return Err(DichotomyError::NoDecay { omega: cfg.omega });
    }
    let past = simpson_nodes(t - cfg.window, t, cfg.h);
    let future = simpson_nodes(t, t + cfg.window, cfg.h);
    let sup_f = past.iter().chain(&future).map(|&(s, _)| f(s).sup_norm()).fold(0.0, f64::max);
    let tail_bound = 2.0 * cfg.m * (-cfg.omega * cfg.window).exp() / cfg.omega * sup_f;
    if tail_bound > cfg.tail_tol {
        return Err(DichotomyError::TailTooLarge { bound: tail_bound, tol: cfg.tail_tol });
    }
    let s_minus = pull_to_origin(evo, &past, f)?;
    let s_plus = pull_to_origin(evo, &future, f)?;
    let mut v = apply_mat(p, &s_minus);
    let ps = apply_mat(p, &s_plus);
    v.axpy(-1.0, &s_plus);
    v.axpy(1.0, &ps);
    let u = evo.apply(t, 0.0, &v)?;
    Ok(GreenResult { t, tail_bound, nodes: past.len() + future.len(), u })
}
