//! Space-time discretisation of `u = C u + D u + F f` on `[0,1) x [-T, T)`.
//!
//! Unknowns live on `x_i = i / N` and `t_m = -T + m dt` with `dt = 2T / M`.
//! Row `i = 0` is evaluated at `x = 1`, the point where all characteristics
//! start, and `C` only couples into column `i = 0` (the line `x = 0`).
//! Time is closed periodically; rows whose characteristic leaves the window
//! are flagged.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::{self, at, CharConfig, Method};
use crate::coefficients::HyperbolicSystem;
use crate::grid::Stencil;
use crate::quad;

use super::DichotomyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeInterp {
    Linear,
    Cubic,
}

#[derive(Debug, Clone, Copy)]
pub struct AssemblyConfig {
    pub n_x: usize,
    pub n_t: usize,
    /// Half width `T` of the time window.
    pub window: f64,
    pub interp: TimeInterp,
    /// Largest tolerated fraction of flagged rows.
    pub max_flagged: f64,
}

impl AssemblyConfig {
    pub fn new(n_x: usize, n_t: usize, window: f64) -> Self {
        AssemblyConfig { n_x, n_t, window, interp: TimeInterp::Cubic, max_flagged: 0.1 }
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, Default)]
pub struct SparseRows {
    ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn from_rows(rows: impl Iterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut s = SparseRows { ptr: vec![0], ..Default::default() };
        for r in rows {
            for (c, v) in r {
                s.cols.push(c as u32);
                s.vals.push(v);
            }
            s.ptr.push(s.cols.len());
        }
        s
    }

    pub fn nrows(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.ptr[r], self.ptr[r + 1]);
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .into_par_iter()
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.nrows())
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn add_into(&self, m: &mut Mat<f64>, alpha: f64) {
        for r in 0..self.nrows() {
            for (c, v) in self.row(r) {
                m[(r, c)] += alpha * v;
            }
        }
    }
}

struct RowData {
    c: Vec<(usize, f64)>,
    d: Vec<(usize, f64)>,
    f: Vec<(usize, f64)>,
    flagged: bool,
}

/// Assembled operators `C`, `D` and the forcing map `F`.
#[derive(Debug, Clone)]
pub struct OperatorAssembly {
    n: usize,
    cfg: AssemblyConfig,
    dt: f64,
    c: SparseRows,
    d: SparseRows,
    f: SparseRows,
    flagged: Vec<bool>,
}

impl OperatorAssembly {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> &AssemblyConfig {
        &self.cfg
    }

    pub fn n_x(&self) -> usize {
        self.cfg.n_x
    }

    pub fn n_t(&self) -> usize {
        self.cfg.n_t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.n * self.cfg.n_x * self.cfg.n_t
    }

    pub fn index(&self, j: usize, i: usize, m: usize) -> usize {
        (j * self.cfg.n_t + m) * self.cfg.n_x + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.cfg.n_x as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        -self.cfg.window + m as f64 * self.dt
    }

    pub fn c(&self) -> &SparseRows {
        &self.c
    }

    pub fn d(&self) -> &SparseRows {
        &self.d
    }

    pub fn f(&self) -> &SparseRows {
        &self.f
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.flagged.iter().filter(|&&f| f).count() as f64 / self.flagged.len() as f64
    }

    pub fn is_flagged(&self, r: usize) -> bool {
        self.flagged[r]
    }

    /// Samples `g(j, x, t)` on the space-time grid.
    pub fn sample(&self, g: impl Fn(usize, f64, f64) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for j in 0..self.n {
            for m in 0..self.cfg.n_t {
                for i in 0..self.cfg.n_x {
                    v[self.index(j, i, m)] = g(j, self.x(i), self.time(m));
                }
            }
        }
        v
    }

    /// `(I - C - D) u`.
    pub fn apply_system(&self, u: &[f64]) -> Vec<f64> {
        let cu = self.c.apply(u);
        let du = self.d.apply(u);
        u.iter().zip(cu.iter().zip(&du)).map(|(ui, (ci, di))| ui - ci - di).collect()
    }

    /// `F f`.
    pub fn apply_forcing(&self, f: &[f64]) -> Vec<f64> {
        self.f.apply(f)
    }

    /// `sup |u - C u - D u - F f|`.
    pub fn residual(&self, u: &[f64], f: &[f64]) -> f64 {
        let lhs = self.apply_system(u);
        let rhs = self.apply_forcing(f);
        lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Dense `I - C - D`.
    pub fn dense_system(&self) -> Mat<f64> {
        let dim = self.dim();
        let mut m = Mat::<f64>::identity(dim, dim);
        self.c.add_into(&mut m, -1.0);
        self.d.add_into(&mut m, -1.0);
        m
    }
}

fn time_stencil(tau: f64, cfg: &AssemblyConfig, dt: f64) -> (Vec<(usize, f64)>, bool) {
    let t = cfg.window;
    let flagged = tau < -t - 1e-9 * dt || tau >= t - 1e-9 * dt;
    let pos = (tau + t) / (2.0 * t);
    let m = cfg.n_t;
    let out = match cfg.interp {
        TimeInterp::Cubic => {
            let st = Stencil::cubic(pos, m);
            st.idx.iter().zip(&st.w).filter(|(_, w)| **w != 0.0).map(|(&i, &w)| (i as usize, w)).collect()
        }
        TimeInterp::Linear => {
            let s = pos * m as f64;
            let mut base = s.floor();
            let mut p = s - base;
            if p < 1e-11 {
                p = 0.0;
            } else if 1.0 - p < 1e-11 {
                p = 0.0;
                base += 1.0;
            }
            let b = (base as i64).rem_euclid(m as i64) as usize;
            if p == 0.0 {
                vec![(b, 1.0)]
            } else {
                vec![(b, 1.0 - p), ((b + 1) % m, p)]
            }
        }
    };
    (out, flagged)
}

/// Sub-steps per spatial cell, so characteristic nodes land on grid nodes.
fn substeps(n_x: usize) -> usize {
    2 * 1024usize.div_ceil(2 * n_x).max(1)
}

fn build_row(
    sys: &HyperbolicSystem,
    cfg: &AssemblyConfig,
    dt: f64,
    j: usize,
    i: usize,
    m: usize,
) -> Result<RowData, DichotomyError> {
    let n = sys.n();
    let nx = cfg.n_x;
    let nt = cfg.n_t;
    let q = substeps(nx);
    let h = 1.0 / (nx * q) as f64;
    let chars = CharConfig { method: Method::Rk4, h, ..Default::default() };
    let len = if i == 0 { nx } else { i };
    let x = len as f64 / nx as f64;
    let t = -cfg.window + m as f64 * dt;
    let idx = |k: usize, node: usize, mm: usize| (k * nt + mm) * nx + node;

    let g = |e: f64, s: f64| Ok(sys.b(j, j, e, s)? / sys.a(j, e, s)?);
    let path = characteristics::tau_path(sys, j, x, t, 0.0, &chars)?;
    let cum = characteristics::path_cumulative(&path, g)?;
    // (xi_l, tau_l, c_l) for l = 0..len
    let mut nodes: Vec<(f64, f64, f64)> = (0..=len)
        .map(|l| {
            let k = (len - l) * q;
            (l as f64 / nx as f64, path.y[k], cum[k].exp())
        })
        .collect();
    if len == 1 {
        // the first cell uses a cubic through two nodes beyond x
        let up = characteristics::tau_path(sys, j, x, t, 3.0 / nx as f64, &chars)?;
        let iu = characteristics::path_cumulative(&up, g)?;
        for l in [2usize, 3] {
            let k = (l - 1) * q;
            nodes.push((l as f64 / nx as f64, up.y[k], iu[k].exp()));
        }
    }
    let w = quad::uniform_weights(len);
    let hx = 1.0 / nx as f64;

    let mut flagged = false;
    let (t0, c0) = (nodes[0].1, nodes[0].2);
    let (st0, fl0) = time_stencil(t0, cfg, dt);
    flagged |= fl0;
    let c = st0.iter().map(|&(mm, wt)| (idx(j, 0, mm), c0 * wt)).collect();

    let mut d = Vec::new();
    let mut f = Vec::new();
    for (l, &(xi, tau, cl)) in nodes.iter().enumerate() {
        let wl = w[l] * hx;
        if wl == 0.0 {
            continue;
        }
        let node = l % nx;
        let a = sys.a(j, xi, tau).map_err(at(xi, tau))?;
        let dl = cl / a;
        let (st, fl) = time_stencil(tau, cfg, dt);
        flagged |= fl;
        for &(mm, wt) in &st {
            f.push((idx(j, node, mm), wl * dl * wt));
        }
        for k in 0..n {
            if k == j || sys.b_coeff(j, k).is_zero() {
                continue;
            }
            let bjk = sys.b(j, k, xi, tau).map_err(at(xi, tau))?;
            if bjk == 0.0 {
                continue;
            }
            for &(mm, wt) in &st {
                d.push((idx(k, node, mm), -wl * dl * bjk * wt));
            }
        }
    }
    Ok(RowData { c, d, f, flagged })
}

/// Assembles `C`, `D` and `F` on the given grid.
pub fn assemble(sys: &HyperbolicSystem, cfg: &AssemblyConfig) -> Result<OperatorAssembly, DichotomyError> {
    if cfg.n_x < 2 || cfg.n_t < 4 {
        return Err(DichotomyError::Config(format!(
            "space-time grid {}x{} is too small",
            cfg.n_x, cfg.n_t
        )));
    }
    if !(cfg.window.is_finite() && cfg.window > 0.0) {
        return Err(DichotomyError::Config(format!("window must be positive, got {}", cfg.window)));
    }
    let n = sys.n();
    let dt = 2.0 * cfg.window / cfg.n_t as f64;
    let rows: Vec<(usize, usize, usize)> = (0..n)
        .flat_map(|j| (0..cfg.n_t).flat_map(move |m| (0..cfg.n_x).map(move |i| (j, i, m))))
        .collect();
    let data: Vec<RowData> = rows
        .par_iter()
        .map(|&(j, i, m)| build_row(sys, cfg, dt, j, i, m))
        .collect::<Result<_, _>>()?;
    let flagged: Vec<bool> = data.iter().map(|r| r.flagged).collect();
    let frac = flagged.iter().filter(|&&f| f).count() as f64 / flagged.len() as f64;
    if frac > cfg.max_flagged {
        return Err(DichotomyError::WindowTooShort { fraction: frac, limit: cfg.max_flagged });
    }
    let c = SparseRows::from_rows(data.iter().map(|r| r.c.clone()));
    let d = SparseRows::from_rows(data.iter().map(|r| r.d.clone()));
    let f = SparseRows::from_rows(data.into_iter().map(|r| r.f));
    Ok(OperatorAssembly { n, cfg: *cfg, dt, c, d, f, flagged })
}

/// Direct solver for `I - C`, which only couples each row to the line `x = 0`.
pub struct IsoSolver {
    /// Per component, the inverse of the line matrix on `x = 0`.
    line_inv: Vec<Mat<f64>>,
}

impl IsoSolver {
    pub fn new(asm: &OperatorAssembly) -> Result<Self, DichotomyError> {
        let nt = asm.n_t();
        let nx = asm.n_x();
        let mut line_inv = Vec::with_capacity(asm.n());
        for j in 0..asm.n() {
            let mut s = Mat::<f64>::identity(nt, nt);
            for m in 0..nt {
                for (col, v) in asm.c.row(asm.index(j, 0, m)) {
                    let mm = col / nx - j * nt;
                    s[(m, mm)] -= v;
                }
            }
            let inv = s.partial_piv_lu().inverse();
            let finite = (0..nt).all(|a| (0..nt).all(|b| inv[(a, b)].is_finite()));
            if !finite {
                return Err(DichotomyError::Singular { what: format!("I - C on component {}", j + 1) });
            }
            line_inv.push(inv);
        }
        Ok(IsoSolver { line_inv })
    }

    /// `(I - C)^{-1} g`.
    pub fn solve(&self, asm: &OperatorAssembly, g: &[f64]) -> Vec<f64> {
        let nt = asm.n_t();
        let nx = asm.n_x();
        let mut u = g.to_vec();
        for j in 0..asm.n() {
            let rhs = Mat::<f64>::from_fn(nt, 1, |m, _| g[asm.index(j, 0, m)]);
            let line = &self.line_inv[j] * &rhs;
            for m in 0..nt {
                u[asm.index(j, 0, m)] = line[(m, 0)];
                for i in 1..nx {
                    let r = asm.index(j, i, m);
                    let mut acc = g[r];
                    for (col, v) in asm.c.row(r) {
                        acc += v * line[(col / nx - j * nt, 0)];
                    }
                    u[r] = acc;
                }
            }
        }
        u
    }

    /// Exact sup-norm of `(I - C_j)^{-1}` on the grid.
    pub fn inverse_norm(&self, asm: &OperatorAssembly, j: usize) -> f64 {
        let nt = asm.n_t();
        let nx = asm.n_x();
        let inv = &self.line_inv[j];
        let mut best = 0.0f64;
        for m in 0..nt {
            best = best.max((0..nt).map(|mm| inv[(m, mm)].abs()).sum::<f64>());
        }
        let mut row = vec![0.0; nt];
        for m in 0..nt {
            for i in 1..nx {
                row.iter_mut().for_each(|v| *v = 0.0);
                for (col, v) in asm.c.row(asm.index(j, i, m)) {
                    let mm = col / nx - j * nt;
                    for (k, rk) in row.iter_mut().enumerate() {
                        *rk += v * inv[(mm, k)];
                    }
                }
                best = best.max(1.0 + row.iter().map(|v| v.abs()).sum::<f64>());
            }
        }
        best
    }
}

/// Sup-norm of `(I - C_j)^{-1}` for every component.
pub fn iso_inverse_norms(asm: &OperatorAssembly) -> Result<Vec<f64>, DichotomyError> {
    let iso = IsoSolver::new(asm)?;
    Ok((0..asm.n()).map(|j| iso.inverse_norm(asm, j)).collect())
}

/// Sup-norm of the `D` block rows of component `j`.
pub fn d_norm(asm: &OperatorAssembly, j: usize) -> f64 {
    let per = asm.n_x() * asm.n_t();
    (j * per..(j + 1) * per)
        .map(|r| asm.d.row(r).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense `(I - C)^{-1}` applied column by column, for tests and small grids.
pub fn dense_iso_inverse(asm: &OperatorAssembly) -> Mat<f64> {
    let dim = asm.dim();
    let mut m = Mat::<f64>::identity(dim, dim);
    asm.c.add_into(&mut m, -1.0);
    let lu = m.partial_piv_lu();
    lu.solve(Mat::<f64>::identity(dim, dim))
}
