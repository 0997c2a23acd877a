//! Evolution family of the system on a periodic grid.
//!
//! `U0(t, s)` transports each component along its characteristic and applies
//! the diagonal damping; the full family solves
//! `U(t, s) = U0(t, s) + int_s^t U0(t, r) B(r) U(r, s) dr`
//! slab by slab with Simpson's rule and Picard iteration.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::characteristics::{self, at, CharConfig, CharError};
use crate::coefficients::{ExtremaReport, HyperbolicSystem};
use crate::expr::EvalError;
use crate::grid::{GridFunction, Stencil};
use crate::quad;

/// Total transport rows kept across cached slabs, roughly 100 bytes each.
const SLAB_CACHE_ROWS: usize = 1 << 19;

#[derive(Debug, Clone, Copy)]
pub struct EvolutionConfig {
    /// Spatial nodes per period.
    pub n_points: usize,
    /// Slab length; slab boundaries sit on multiples of `dt`.
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub chars: CharConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            n_points: 256,
            dt: 1.0 / 256.0,
            picard_tol: 1e-10,
            picard_max: 50,
            chars: CharConfig::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn with_grid(n_points: usize, dt: f64) -> Self {
        EvolutionConfig { n_points, dt, ..Default::default() }
    }
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Char(#[from] CharError),
    #[error("coefficient evaluation failed at x={x}, t={t}: {source}")]
    Eval { x: f64, t: f64, source: EvalError },
    #[error(
        "Picard iteration did not contract on slab [{slab_start}, {slab_end}] \
         after {iterations} iterations (defect {defect:e})"
    )]
    NonContraction { slab_start: f64, slab_end: f64, defect: f64, iterations: usize },
    #[error("grid function has shape {found:?}, expected {expected:?}")]
    Shape { found: (usize, usize), expected: (usize, usize) },
    #[error("invalid evolution settings: {0}")]
    Config(String),
}

/// Sparse transport operator `U0(t, s)` on the grid.
#[derive(Debug, Clone)]
pub struct TransportOp {
    n: usize,
    points: usize,
    idx: Vec<[u32; 4]>,
    w: Vec<[f64; 4]>,
}

impl TransportOp {
    pub fn apply(&self, u: &GridFunction) -> GridFunction {
        let mut out = GridFunction::zeros(self.n, self.points);
        self.apply_into(u, &mut out);
        out
    }

    pub fn apply_into(&self, u: &GridFunction, out: &mut GridFunction) {
        let p = self.points;
        let src = u.as_slice();
        let dst = out.as_mut_slice();
        for j in 0..self.n {
            let s = &src[j * p..(j + 1) * p];
            for i in 0..p {
                let r = j * p + i;
                let (ix, w) = (&self.idx[r], &self.w[r]);
                dst[r] = w[0] * s[ix[0] as usize]
                    + w[1] * s[ix[1] as usize]
                    + w[2] * s[ix[2] as usize]
                    + w[3] * s[ix[3] as usize];
            }
        }
    }

    /// Row `r` as `(column, weight)` pairs in the flat grid index.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let j = r / self.points;
        let off = j * self.points;
        self.idx[r].iter().zip(&self.w[r]).map(move |(&i, &w)| (off + i as usize, w))
    }
}

/// Pointwise coupling `(B v)_j = -sum_{k != j} b_jk v_k` at a fixed time.
#[derive(Debug, Clone)]
pub struct CouplingOp {
    n: usize,
    points: usize,
    /// Per node, row-major `n x n` with zero diagonal.
    m: Vec<f64>,
    zero: bool,
}

impl CouplingOp {
    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        let mut out = GridFunction::zeros(self.n, self.points);
        if self.zero {
            return out;
        }
        let (n, p) = (self.n, self.points);
        let src = v.as_slice();
        let dst = out.as_mut_slice();
        for i in 0..p {
            let m = &self.m[i * n * n..(i + 1) * n * n];
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += m[j * n + k] * src[k * p + i];
                }
                dst[j * p + i] = acc;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
}

struct SlabOps {
    start: f64,
    end: f64,
    e0: TransportOp,
    em: TransportOp,
    m0: TransportOp,
    me: TransportOp,
    b0: CouplingOp,
    bm: CouplingOp,
    be: CouplingOp,
}

/// Evolution family `U(t, s)` of a validated system.
pub struct Evolution<'a> {
    sys: &'a HyperbolicSystem,
    cfg: EvolutionConfig,
    autonomous: bool,
    /// Keyed by slab length when autonomous, otherwise by both endpoints.
    cache: Mutex<HashMap<(u64, u64), Arc<SlabOps>>>,
}

impl<'a> Evolution<'a> {
    pub fn new(sys: &'a HyperbolicSystem, cfg: EvolutionConfig) -> Result<Self, EvolutionError> {
        if cfg.n_points < 16 || !cfg.n_points.is_power_of_two() {
            return Err(EvolutionError::Config(format!(
                "grid size must be a power of two and at least 16, got {}",
                cfg.n_points
            )));
        }
        if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
            return Err(EvolutionError::Config(format!("dt must be positive, got {}", cfg.dt)));
        }
        Ok(Evolution { sys, cfg, autonomous: sys.is_autonomous(), cache: Mutex::new(HashMap::new()) })
    }

    pub fn system(&self) -> &HyperbolicSystem {
        self.sys
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }

    pub fn points(&self) -> usize {
        self.cfg.n_points
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction::zeros(self.sys.n(), self.cfg.n_points)
    }

    fn check(&self, u: &GridFunction) -> Result<(), EvolutionError> {
        let expected = (self.sys.n(), self.cfg.n_points);
        if (u.n(), u.points()) != expected {
            return Err(EvolutionError::Shape { found: (u.n(), u.points()), expected });
        }
        Ok(())
    }

    /// Transport operator `U0(t, s)`.
    pub fn transport(&self, t: f64, s: f64) -> Result<TransportOp, EvolutionError> {
        let (n, p) = (self.sys.n(), self.cfg.n_points);
        let rows: Vec<Result<(Stencil, f64), CharError>> = (0..n * p)
            .into_par_iter()
            .map(|r| {
                let (j, i) = (r / p, r % p);
                let x = i as f64 / p as f64;
                if t == s {
                    return Ok((Stencil::cubic(x, p), 1.0));
                }
                let path = characteristics::xi_path(self.sys, j, x, t, s, &self.cfg.chars)?;
                let vals: Vec<f64> = path
                    .s
                    .iter()
                    .zip(&path.y)
                    .map(|(&tau, &xi)| self.sys.b(j, j, xi, tau).map_err(at(xi, tau)))
                    .collect::<Result<_, _>>()?;
                let damp = quad::total(&path.s, &vals).exp();
                Ok((Stencil::cubic(path.end(), p), damp))
            })
            .collect();
        let mut idx = Vec::with_capacity(n * p);
        let mut w = Vec::with_capacity(n * p);
        for r in rows {
            let (st, d) = r?;
            idx.push(st.idx);
            w.push(st.w.map(|v| v * d));
        }
        Ok(TransportOp { n, points: p, idx, w })
    }

    /// Coupling operator `B(t)`.
    pub fn coupling(&self, t: f64) -> Result<CouplingOp, EvolutionError> {
        let (n, p) = (self.sys.n(), self.cfg.n_points);
        let mut m = vec![0.0; n * n * p];
        let mut zero = true;
        for j in 0..n {
            for k in 0..n {
                if j == k || self.sys.b_coeff(j, k).is_zero() {
                    continue;
                }
                zero = false;
                for i in 0..p {
                    let x = i as f64 / p as f64;
                    let v = self
                        .sys
                        .b(j, k, x, t)
                        .map_err(|source| EvolutionError::Eval { x, t, source })?;
                    m[i * n * n + j * n + k] = -v;
                }
            }
        }
        Ok(CouplingOp { n, points: p, m, zero })
    }

    /// Applies `U0(t, s)` to `u`.
    pub fn u0_apply(&self, t: f64, s: f64, u: &GridFunction) -> Result<GridFunction, EvolutionError> {
        self.check(u)?;
        if t == s {
            return Ok(u.clone());
        }
        Ok(self.transport(t, s)?.apply(u))
    }

    /// Applies `B(t)` to `v`.
    pub fn b_apply(&self, t: f64, v: &GridFunction) -> Result<GridFunction, EvolutionError> {
        self.check(v)?;
        Ok(self.coupling(t)?.apply(v))
    }

    /// `s`, every multiple of `dt` strictly between `s` and `t`, and `t`.
    pub fn slab_points(&self, s: f64, t: f64) -> Vec<f64> {
        let dt = self.cfg.dt;
        let eps = 1e-9 * dt;
        let mut pts = vec![s];
        if t > s {
            let mut k = (s / dt).floor() + 1.0;
            loop {
                let v = k * dt;
                if v >= t - eps {
                    break;
                }
                if v > s + eps {
                    pts.push(v);
                }
                k += 1.0;
            }
        } else {
            let mut k = (s / dt).ceil() - 1.0;
            loop {
                let v = k * dt;
                if v <= t + eps {
                    break;
                }
                if v < s - eps {
                    pts.push(v);
                }
                k -= 1.0;
            }
        }
        pts.push(t);
        pts
    }

    fn build_slab(&self, start: f64, end: f64) -> Result<SlabOps, EvolutionError> {
        let mid = 0.5 * (start + end);
        Ok(SlabOps {
            start,
            end,
            e0: self.transport(end, start)?,
            em: self.transport(end, mid)?,
            m0: self.transport(mid, start)?,
            me: self.transport(mid, end)?,
            b0: self.coupling(start)?,
            bm: self.coupling(mid)?,
            be: self.coupling(end)?,
        })
    }

    fn slab(&self, start: f64, end: f64) -> Result<Arc<SlabOps>, EvolutionError> {
        let key = if self.autonomous { (0, (end - start).to_bits()) } else { (start.to_bits(), end.to_bits()) };
        if let Some(ops) = self.cache.lock().expect("slab cache poisoned").get(&key) {
            return Ok(ops.clone());
        }
        let ops = Arc::new(self.build_slab(start, end)?);
        let mut guard = self.cache.lock().expect("slab cache poisoned");
        if guard.len() >= SLAB_CACHE_ROWS / (self.sys.n() * self.cfg.n_points).max(1) {
            guard.clear();
        }
        guard.insert(key, ops.clone());
        Ok(ops)
    }

    fn step(&self, ops: &SlabOps, u0: &GridFunction) -> Result<GridFunction, EvolutionError> {
        let h = ops.end - ops.start;
        let e_free = ops.e0.apply(u0);
        let m_free = ops.m0.apply(u0);
        let coupled = !(ops.b0.is_zero() && ops.bm.is_zero() && ops.be.is_zero());
        if !coupled {
            return Ok(e_free);
        }
        let b0u = ops.b0.apply(u0);
        let mut c_e = ops.e0.apply(&b0u);
        c_e.scale(h / 6.0);
        c_e.axpy(1.0, &e_free);
        let mut c_m = ops.m0.apply(&b0u);
        c_m.scale(5.0 * h / 24.0);
        c_m.axpy(1.0, &m_free);

        let (mut um, mut ue) = (m_free, e_free);
        let mut defect = f64::INFINITY;
        for _ in 0..self.cfg.picard_max {
            let bm_um = ops.bm.apply(&um);
            let be_ue = ops.be.apply(&ue);
            let mut ue_new = ops.em.apply(&bm_um);
            ue_new.scale(4.0 * h / 6.0);
            ue_new.axpy(h / 6.0, &be_ue);
            ue_new.axpy(1.0, &c_e);
            let mut um_new = ops.me.apply(&be_ue);
            um_new.scale(-h / 24.0);
            um_new.axpy(8.0 * h / 24.0, &bm_um);
            um_new.axpy(1.0, &c_m);
            defect = ue_new.dist_sup(&ue).max(um_new.dist_sup(&um));
            let scale = ue_new.sup_norm().max(um_new.sup_norm()).max(1.0);
            ue = ue_new;
            um = um_new;
            if !defect.is_finite() {
                break;
            }
            if defect <= self.cfg.picard_tol * scale {
                return Ok(ue);
            }
        }
        Err(EvolutionError::NonContraction {
            slab_start: ops.start,
            slab_end: ops.end,
            defect,
            iterations: self.cfg.picard_max,
        })
    }

    /// Applies `U(t, s)` to `u`; `t < s` evolves backwards.
    pub fn apply(&self, t: f64, s: f64, u: &GridFunction) -> Result<GridFunction, EvolutionError> {
        self.apply_with(t, s, u, |_, _| {})
    }

    /// Like [`Evolution::apply`], calling `observe` with the state at every slab boundary.
    pub fn apply_with(
        &self,
        t: f64,
        s: f64,
        u: &GridFunction,
        mut observe: impl FnMut(f64, &GridFunction),
    ) -> Result<GridFunction, EvolutionError> {
        self.check(u)?;
        observe(s, u);
        if t == s {
            return Ok(u.clone());
        }
        let pts = self.slab_points(s, t);
        let mut cur = u.clone();
        for w in pts.windows(2) {
            let ops = self.slab(w[0], w[1])?;
            cur = self.step(&ops, &cur)?;
            observe(w[1], &cur);
        }
        Ok(cur)
    }

    /// Applies `U(t, s)` to every column in place.
    pub fn apply_many(&self, t: f64, s: f64, cols: &mut [GridFunction]) -> Result<(), EvolutionError> {
        self.apply_many_with(t, s, cols, |_, _| {})
    }

    /// Batch version of [`Evolution::apply_with`].
    pub fn apply_many_with(
        &self,
        t: f64,
        s: f64,
        cols: &mut [GridFunction],
        mut observe: impl FnMut(f64, &[GridFunction]),
    ) -> Result<(), EvolutionError> {
        for c in cols.iter() {
            self.check(c)?;
        }
        observe(s, cols);
        if t == s {
            return Ok(());
        }
        let pts = self.slab_points(s, t);
        for w in pts.windows(2) {
            let ops = self.slab(w[0], w[1])?;
            let next: Vec<Result<GridFunction, EvolutionError>> =
                cols.par_iter().map(|c| self.step(&ops, c)).collect();
            for (c, r) in cols.iter_mut().zip(next) {
                *c = r?;
            }
            observe(w[1], cols);
        }
        Ok(())
    }

    /// `|U(t,r) U(r,s) u - U(t,s) u|` in the sup norm.
    pub fn cocycle_defect(&self, t: f64, r: f64, s: f64, u: &GridFunction) -> Result<f64, EvolutionError> {
        let two = self.apply(t, r, &self.apply(r, s, u)?)?;
        let one = self.apply(t, s, u)?;
        Ok(two.dist_sup(&one))
    }
}

/// Constants of the a-priori bound `|U(t,s)| <= K exp(omega |t - s|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpBound {
    pub k: f64,
    pub omega: f64,
    pub theta: f64,
}

/// A-priori growth bound from sampled coefficient bounds.
pub fn exp_bound(ext: &ExtremaReport, n: usize) -> ExpBound {
    let nf = n as f64;
    let mut theta = f64::INFINITY;
    if ext.sup_abs_a > 0.0 {
        theta = theta.min(1.0 / (2.0 * ext.sup_abs_a));
    }
    if ext.sup_abs_b > 0.0 {
        theta = theta.min(1.0 / (2.0 * nf * (nf + 1.0) * ext.sup_abs_b));
    }
    let omega = (3.0 + 2.0 * nf).ln() / theta;
    ExpBound { k: 1.0, omega, theta }
}

/// Propagates `u` from `s` to `t` and records every `every`-th slab boundary.
pub fn simulate(
    evo: &Evolution<'_>,
    t: f64,
    s: f64,
    u: &GridFunction,
    every: usize,
) -> Result<(GridFunction, Vec<(f64, GridFunction)>), EvolutionError> {
    let every = every.max(1);
    let mut snaps = Vec::new();
    let mut count = 0usize;
    let mut last_time = s;
    let out = evo.apply_with(t, s, u, |time, g| {
        if count % every == 0 {
            snaps.push((time, g.clone()));
        }
        count += 1;
        last_time = time;
    })?;
    if snaps.last().map(|(time, _)| *time) != Some(last_time) {
        snaps.push((last_time, out.clone()));
    }
    Ok((out, snaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn decoupled() -> HyperbolicSystem {
        HyperbolicSystem::from_strings(&["1", "-1"], &[&["1", "0"], &["0", "-1"]], 5.0).unwrap()
    }

    #[test]
    fn slab_points_align_to_global_grid() {
        let sys = decoupled();
        let evo = Evolution::new(&sys, EvolutionConfig::with_grid(16, 0.25)).unwrap();
        assert_eq!(evo.slab_points(0.1, 0.9), vec![0.1, 0.25, 0.5, 0.75, 0.9]);
        assert_eq!(evo.slab_points(0.5, -0.3), vec![0.5, 0.25, 0.0, -0.25, -0.3]);
        assert_eq!(evo.slab_points(0.0, 0.5), vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn decoupled_constant_is_exact() {
        let sys = decoupled();
        let evo = Evolution::new(&sys, EvolutionConfig::with_grid(64, 1.0 / 64.0)).unwrap();
        let u0 = GridFunction::from_fn(2, 64, |j, x| if j == 0 { (2.0 * PI * x).sin() } else { (2.0 * PI * x).cos() });
        let u = evo.apply(1.0, 0.0, &u0).unwrap();
        let exact = GridFunction::from_fn(2, 64, |j, x| {
            if j == 0 {
                (-1.0f64).exp() * (2.0 * PI * (x - 1.0)).sin()
            } else {
                1.0f64.exp() * (2.0 * PI * (x + 1.0)).cos()
            }
        });
        assert!(u.dist_sup(&exact) < 1e-12);
    }

    #[test]
    fn identity_at_equal_times() {
        let sys = decoupled();
        let evo = Evolution::new(&sys, EvolutionConfig::with_grid(32, 1.0 / 32.0)).unwrap();
        let u0 = GridFunction::from_fn(2, 32, |j, x| j as f64 + x);
        assert_eq!(evo.apply(0.3, 0.3, &u0).unwrap(), u0);
    }

    #[test]
    fn large_slab_fails_to_contract() {
        let sys = HyperbolicSystem::from_strings(&["1", "-1"], &[&["0", "60"], &["60", "0"]], 5.0).unwrap();
        let evo = Evolution::new(&sys, EvolutionConfig::with_grid(16, 0.5)).unwrap();
        let u0 = GridFunction::from_fn(2, 16, |_, _| 1.0);
        let err = evo.apply(1.0, 0.0, &u0).unwrap_err();
        assert!(matches!(err, EvolutionError::NonContraction { .. }), "{err}");
    }
}
