//! Numerical detection and refutation of exponential dichotomy.
//!
//! Two routes: spectral splitting of the monodromy matrix for autonomous or
//! time-periodic coefficients, and a finite-time singular-value splitting for
//! general coefficients. Both are backed by the smallest-singular-value trace of
//! the discretised `I - C - D` and by a fit of the dichotomy constants.

pub mod assembly;
pub mod bounded;
pub mod fit;
pub mod green;
pub mod linalg;
pub mod monodromy;
pub mod propagate;
pub mod splitting;

use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::characteristics::CharError;
use crate::coefficients::HyperbolicSystem;
use crate::evolution::{Evolution, EvolutionConfig, EvolutionError};

pub use assembly::{assemble, AssemblyConfig, IsoSolver, OperatorAssembly, TimeInterp};
pub use bounded::{solve_bounded, svd_level, svd_trace, BoundedConfig, BoundedSolution, SvdLevel};
pub use fit::{decay_fit, DecayFit, FitConfig};
pub use green::{greens_apply, GreenConfig, GreenResult};
pub use monodromy::{monodromy_projection, Eigenvalue, MonodromyConfig, MonodromyResult};
pub use splitting::{finite_time_splitting, Splitting, SplittingConfig};

#[derive(Debug, Error)]
pub enum DichotomyError {
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("invalid dichotomy settings: {0}")]
    Config(String),
    #[error(
        "{:.1}% of rows leave the time window (limit {:.1}%); use a larger window",
        100.0 * fraction,
        100.0 * limit
    )]
    WindowTooShort { fraction: f64, limit: f64 },
    #[error("{what} is singular")]
    Singular { what: String },
    #[error("I - C - D is numerically singular: smallest singular value {sigma_min:e} ({relative:e} relative)")]
    NearSingular { sigma_min: f64, relative: f64 },
    #[error("iterative solve stalled at relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("tail bound {bound:e} exceeds tolerance {tol:e}; enlarge the window")]
    TailTooLarge { bound: f64, tol: f64 },
    #[error("fitted decay rate {omega} is not positive, no tail bound available")]
    NoDecay { omega: f64 },
    #[error("dense problem of dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },
    #[error("{0}")]
    Linalg(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DichotomyVerdict {
    Dichotomy,
    NoDichotomy,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Monodromy,
    FiniteTime,
}

/// Outcome at one refinement level of the propagator grid.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementLevel {
    pub n_points: usize,
    pub verdict: DichotomyVerdict,
    pub rank_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub verdict: DichotomyVerdict,
    pub route: Route,
    pub n_points: usize,
    /// `trace P`.
    pub rank: Option<f64>,
    /// `trace` of each diagonal block of `P` divided by `N`.
    pub component_rank: Option<Vec<f64>>,
    pub idempotence_defect: Option<f64>,
    pub fit: Option<DecayFit>,
    pub spectral: Option<MonodromyResult>,
    pub splitting: Option<Splitting>,
    pub svd_trace: Vec<SvdLevel>,
    pub sensitivity: Option<SvdLevel>,
    pub refinement: Vec<RefinementLevel>,
    /// `sqrt(n N)`, between the Euclidean and sup norms on the grid.
    pub norm_equivalence: f64,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub projection: Option<Mat<f64>>,
}

impl DichotomyReport {
    /// `max |P - E|` with `E` the projection onto the given components.
    pub fn off_block_mass(&self, n: usize, stable: &[usize]) -> Option<f64> {
        let p = self.projection.as_ref()?;
        let np = self.n_points;
        let mut worst = 0.0f64;
        for r in 0..n * np {
            for c in 0..n * np {
                let e = if r == c && stable.contains(&(r / np)) { 1.0 } else { 0.0 };
                worst = worst.max((p[(r, c)] - e).abs());
            }
        }
        Some(worst)
    }
}

#[derive(Debug, Clone)]
pub struct DichotomyConfig {
    pub n_points: usize,
    /// Slab length; defaults to `1 / n_points`.
    pub dt: Option<f64>,
    /// Time period of the coefficients; autonomous systems use 1.
    pub period: Option<f64>,
    pub monodromy: MonodromyConfig,
    pub splitting: SplittingConfig,
    pub fit: FitConfig,
    /// Space-time grids `(N, M)` of the singular-value trace, coarse to fine.
    pub svd_levels: Vec<(usize, usize)>,
    pub window: f64,
    pub sensitivity_window: f64,
    /// Relative smallest singular value below which `I - C - D` counts as singular.
    pub singular_rtol: f64,
    /// Repeat the propagator route at `2 N` and require agreement.
    pub refine: bool,
    pub skip_svd: bool,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        DichotomyConfig {
            n_points: 64,
            dt: None,
            period: None,
            monodromy: MonodromyConfig::default(),
            splitting: SplittingConfig::default(),
            fit: FitConfig::default(),
            svd_levels: vec![(16, 40), (32, 80)],
            window: 10.0,
            sensitivity_window: 15.0,
            singular_rtol: 1e-4,
            refine: true,
            skip_svd: false,
        }
    }
}

fn evo_config(cfg: &DichotomyConfig, n_points: usize) -> EvolutionConfig {
    let dt = cfg.dt.map(|d| d * cfg.n_points as f64 / n_points as f64).unwrap_or(1.0 / n_points as f64);
    EvolutionConfig::with_grid(n_points, dt)
}

fn component_rank(p: &Mat<f64>, n: usize, np: usize) -> Vec<f64> {
    (0..n).map(|j| (0..np).map(|i| p[(j * np + i, j * np + i)]).sum::<f64>() / np as f64).collect()
}

fn trace(p: &Mat<f64>) -> f64 {
    (0..p.nrows()).map(|i| p[(i, i)]).sum()
}

fn idempotence(p: &Mat<f64>) -> f64 {
    linalg::max_abs(&(p * p - p))
}

struct Stage {
    verdict: DichotomyVerdict,
    projection: Option<Mat<f64>>,
    spectral: Option<MonodromyResult>,
    splitting: Option<Splitting>,
    notes: Vec<String>,
}

fn propagator_stage(sys: &HyperbolicSystem, cfg: &DichotomyConfig, np: usize) -> Result<Stage, DichotomyError> {
    let evo = Evolution::new(sys, evo_config(cfg, np))?;
    let period = if sys.is_autonomous() { Some(cfg.period.unwrap_or(1.0)) } else { cfg.period };
    let mut notes = Vec::new();
    if let Some(period) = period {
        let m = monodromy::monodromy_from_evolution(&evo, period, &cfg.monodromy)?;
        let (verdict, projection) = (m.evidence, m.projection.clone());
        if let Some(reason) = &m.reason {
            notes.push(format!("N={np}: {reason}"));
        }
        Ok(Stage { verdict, projection, spectral: Some(m), splitting: None, notes })
    } else {
        let s = splitting::finite_time_splitting(&evo, &cfg.splitting)?;
        let verdict = if s.projection.is_some() {
            DichotomyVerdict::Dichotomy
        } else {
            DichotomyVerdict::Indeterminate
        };
        if let Some(reason) = &s.reason {
            notes.push(format!("N={np}: {reason}"));
        }
        Ok(Stage { verdict, projection: s.projection.clone(), splitting: Some(s), spectral: None, notes })
    }
}

/// Runs the applicable route with refinement, the singular-value trace and the decay fit.
pub fn detect(sys: &HyperbolicSystem, cfg: &DichotomyConfig) -> Result<DichotomyReport, DichotomyError> {
    let n = sys.n();
    let np = cfg.n_points;
    let route = if sys.is_autonomous() || cfg.period.is_some() { Route::Monodromy } else { Route::FiniteTime };
    let base = propagator_stage(sys, cfg, np)?;
    let mut notes = base.notes.clone();
    let mut verdict = base.verdict;
    let rank_frac = |p: &Option<Mat<f64>>, np: usize| p.as_ref().map(|p| trace(p) / (n * np) as f64);
    let mut refinement =
        vec![RefinementLevel { n_points: np, verdict: base.verdict, rank_fraction: rank_frac(&base.projection, np) }];

    if cfg.refine {
        let fine = propagator_stage(sys, cfg, 2 * np)?;
        notes.extend(fine.notes.iter().cloned());
        let level = RefinementLevel {
            n_points: 2 * np,
            verdict: fine.verdict,
            rank_fraction: rank_frac(&fine.projection, 2 * np),
        };
        if level.verdict != verdict {
            notes.push(format!("verdict changed under refinement to N={}", 2 * np));
            verdict = DichotomyVerdict::Indeterminate;
        } else if let (Some(a), Some(b)) = (refinement[0].rank_fraction, level.rank_fraction) {
            if (a - b).abs() > 1e-6 {
                notes.push(format!("rank fraction changed under refinement: {a} vs {b}"));
                verdict = DichotomyVerdict::Indeterminate;
            }
        }
        refinement.push(level);
    }

    let mut svd = Vec::new();
    let mut sensitivity = None;
    if !cfg.skip_svd {
        for &(nx, nt) in &cfg.svd_levels {
            svd.push(svd_level(sys, &AssemblyConfig::new(nx, nt, cfg.window))?);
        }
        let collapsed = svd.last().map(|l| l.relative < cfg.singular_rtol).unwrap_or(false);
        if collapsed {
            notes.push("smallest singular value of I - C - D collapsed under refinement".into());
            if verdict == DichotomyVerdict::Dichotomy {
                verdict = DichotomyVerdict::Indeterminate;
            }
        }
        if route == Route::FiniteTime {
            if let Some(&(nx, nt)) = cfg.svd_levels.first() {
                let scale = cfg.sensitivity_window / cfg.window;
                let nt2 = ((nt as f64) * scale).round() as usize;
                let lvl = svd_level(sys, &AssemblyConfig::new(nx, nt2, cfg.sensitivity_window))?;
                let rel0 = svd[0].relative;
                let agree = (lvl.relative >= cfg.singular_rtol) == (rel0 >= cfg.singular_rtol);
                if !agree {
                    notes.push(format!(
                        "singular-value verdict differs between T={} and T={}",
                        cfg.window, cfg.sensitivity_window
                    ));
                    verdict = DichotomyVerdict::Indeterminate;
                }
                sensitivity = Some(lvl);
            }
        }
    }

    let mut fit = None;
    if let Some(p) = &base.projection {
        let evo = Evolution::new(sys, evo_config(cfg, np))?;
        let f = fit::decay_fit(&evo, p, &cfg.fit)?;
        if !(f.omega > 0.0) && verdict == DichotomyVerdict::Dichotomy {
            notes.push(format!("fitted decay rate {} is not positive", f.omega));
            verdict = DichotomyVerdict::Indeterminate;
        }
        fit = Some(f);
    }

    let projection = base.projection;
    let idem = projection.as_ref().map(idempotence);
    if let Some(d) = idem {
        if d > 1e-6 && verdict == DichotomyVerdict::Dichotomy {
            notes.push(format!("projection idempotence defect {d:e}"));
            verdict = DichotomyVerdict::Indeterminate;
        }
    }
    Ok(DichotomyReport {
        verdict,
        route,
        n_points: np,
        rank: projection.as_ref().map(trace),
        component_rank: projection.as_ref().map(|p| component_rank(p, n, np)),
        idempotence_defect: idem,
        fit,
        spectral: base.spectral,
        splitting: base.splitting,
        svd_trace: svd,
        sensitivity,
        refinement,
        norm_equivalence: ((n * np) as f64).sqrt(),
        notes,
        projection,
    })
}
