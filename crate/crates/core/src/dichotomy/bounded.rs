//! Bounded solutions of `u = C u + D u + F f` and singular values of `I - C - D`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use crate::coefficients::HyperbolicSystem;

use super::assembly::{assemble, AssemblyConfig, IsoSolver, OperatorAssembly};
use super::linalg::{gmres, sigma_min_dense};
use super::DichotomyError;

#[derive(Debug, Clone, Copy)]
pub struct BoundedConfig {
    /// Largest dimension solved by dense LU.
    pub dense_limit: usize,
    pub gmres_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Relative smallest singular value treated as singular.
    pub singular_rtol: f64,
}

impl Default for BoundedConfig {
    fn default() -> Self {
        BoundedConfig { dense_limit: 4096, gmres_tol: 1e-12, restart: 60, max_iter: 3000, singular_rtol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundedSolution {
    pub method: &'static str,
    /// `sup |u - C u - D u - F f|`.
    pub residual: f64,
    pub iterations: usize,
    pub sigma_min: Option<f64>,
    pub relative_sigma_min: Option<f64>,
    #[serde(skip)]
    pub u: Vec<f64>,
}

impl BoundedSolution {
    pub fn at(&self, asm: &OperatorAssembly, j: usize, i: usize, m: usize) -> f64 {
        self.u[asm.index(j, i, m)]
    }
}

/// Solves `(I - C - D) u = F f` for a forcing sampled on the grid.
pub fn solve_bounded(
    asm: &OperatorAssembly,
    f: &[f64],
    cfg: &BoundedConfig,
) -> Result<BoundedSolution, DichotomyError> {
    let dim = asm.dim();
    if f.len() != dim {
        return Err(DichotomyError::Config(format!("forcing has length {}, expected {dim}", f.len())));
    }
    let rhs = asm.apply_forcing(f);
    if dim <= cfg.dense_limit {
        let a = asm.dense_system();
        let (smin, norm) = sigma_min_dense(&a);
        let rel = if norm > 0.0 { smin / norm } else { 0.0 };
        if rel < cfg.singular_rtol {
            return Err(DichotomyError::NearSingular { sigma_min: smin, relative: rel });
        }
        let b = Mat::<f64>::from_fn(dim, 1, |i, _| rhs[i]);
        let x = a.partial_piv_lu().solve(&b);
        let u: Vec<f64> = (0..dim).map(|i| x[(i, 0)]).collect();
        let residual = asm.residual(&u, f);
        return Ok(BoundedSolution {
            method: "dense-lu",
            residual,
            iterations: 1,
            sigma_min: Some(smin),
            relative_sigma_min: Some(rel),
            u,
        });
    }
    let iso = IsoSolver::new(asm)?;
    let r = gmres(
        |x| asm.apply_system(x),
        |x| iso.solve(asm, x),
        &rhs,
        cfg.gmres_tol,
        cfg.restart,
        cfg.max_iter,
    );
    if !r.converged {
        return Err(DichotomyError::NotConverged { residual: r.relative_residual, iterations: r.iterations });
    }
    let u = r.x;
    let residual = asm.residual(&u, f);
    Ok(BoundedSolution { method: "gmres", residual, iterations: r.iterations, sigma_min: None, relative_sigma_min: None, u })
}

/// Singular-value data of `I - C - D` on one grid.
#[derive(Debug, Clone, Serialize)]
pub struct SvdLevel {
    pub n_x: usize,
    pub n_t: usize,
    pub window: f64,
    pub dim: usize,
    pub sigma_min: f64,
    pub norm: f64,
    pub relative: f64,
    pub flagged_fraction: f64,
}

/// Largest dimension for the dense singular-value estimate.
pub const SVD_DENSE_LIMIT: usize = 10_000;

pub fn svd_level(sys: &HyperbolicSystem, cfg: &AssemblyConfig) -> Result<SvdLevel, DichotomyError> {
    let asm = assemble(sys, cfg)?;
    let dim = asm.dim();
    if dim > SVD_DENSE_LIMIT {
        return Err(DichotomyError::TooLarge { dim, limit: SVD_DENSE_LIMIT });
    }
    let (smin, norm) = sigma_min_dense(&asm.dense_system());
    Ok(SvdLevel {
        n_x: cfg.n_x,
        n_t: cfg.n_t,
        window: cfg.window,
        dim,
        sigma_min: smin,
        norm,
        relative: if norm > 0.0 { smin / norm } else { 0.0 },
        flagged_fraction: asm.flagged_fraction(),
    })
}

/// Singular-value data on a sequence of grids.
pub fn svd_trace(sys: &HyperbolicSystem, levels: &[AssemblyConfig]) -> Result<Vec<SvdLevel>, DichotomyError> {
    levels.iter().map(|c| svd_level(sys, c)).collect()
}
