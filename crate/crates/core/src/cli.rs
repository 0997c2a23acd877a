//! Batch front end. One subcommand per analysis; reports go to stdout or
//! `--output`, errors go to stderr as JSON.
//!
//! Exit codes: 0 analysis completed (whatever the verdict), 1 usage error,
//! 2 invalid input, 3 numerical failure.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::characteristics::{CharConfig, CharError};
use crate::coefficients::{
    compute_extrema, validate_system, ExtremaReport, HyperbolicSystem, SpeedSignature, SystemDoc, SystemError,
};
use crate::conditions::{
    corollary_check, theorem2_check, theorem3_check, uniqueness_report, ConditionError, ConditionReport,
    CorollaryReport, DecayCouplingConfig, UniquenessReport,
};
use crate::dichotomy::{
    detect, greens_apply, DichotomyConfig, DichotomyError, DichotomyReport, DichotomyVerdict, GreenConfig,
    GreenResult, MonodromyConfig,
};
use crate::evolution::{exp_bound, simulate, Evolution, EvolutionConfig, EvolutionError, ExpBound};
use crate::expr::{EvalError, Expr};
use crate::grid::GridFunction;
use crate::reduction::{reduce_doc, trichotomy_const_check, ReductionError, SecondOrderDoc, TrichotomyReport};
use crate::report::{to_json, to_json_pretty};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Defaults shared by the subcommands.
pub mod defaults {
    pub const EXTREMA_NX: usize = 257;
    pub const EXTREMA_NT: usize = 257;
    pub const TH2_WINDOW: (f64, f64) = (-10.0, 10.0);
    pub const TH2_EPS: &str = "0.1,0.01,0.001";
    pub const TH2_NT: usize = 2001;
    pub const UNIQUENESS_THRESHOLD: f64 = 5.0;
    pub const UNIQUENESS_SPAN: f64 = 5.0;
    pub const UNIQUENESS_SAMPLES: usize = 21;
    pub const CHAR_STEP: f64 = 1.0 / 1024.0;
    pub const SIM_POINTS: usize = 256;
    pub const PICARD_TOL: f64 = 1e-10;
    pub const PICARD_MAX: usize = 50;
    pub const DICH_POINTS: usize = 64;
    pub const DICH_WINDOW: f64 = 10.0;
    pub const GAP_TOL: f64 = 1e-2;
    pub const SINGULAR_RTOL: f64 = 1e-4;
    pub const GREEN_WINDOW: f64 = 16.0;
    pub const GREEN_STEP: f64 = 1.0 / 16.0;
    pub const GREEN_TAIL_TOL: f64 = 1e-6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Pretty,
    /// Tables for plotting; `simulate` and `dichotomy` only.
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "hypdich", version, about = "Dichotomy analysis of periodic linear hyperbolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the report here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct Input {
    /// System document (JSON); `-` reads stdin.
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct Sampling {
    #[arg(long, default_value_t = defaults::EXTREMA_NX)]
    pub nx: usize,
    #[arg(long, default_value_t = defaults::EXTREMA_NT)]
    pub nt: usize,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, default_value_t = defaults::DICH_POINTS)]
    pub n_points: usize,
    /// Slab length, default `1 / n_points`.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time period of the coefficients.
    #[arg(long)]
    pub period: Option<f64>,
    /// Half width `T` of the space-time window.
    #[arg(long, default_value_t = defaults::DICH_WINDOW)]
    pub window: f64,
    #[arg(long, default_value_t = defaults::GAP_TOL)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = defaults::SINGULAR_RTOL)]
    pub singular_rtol: f64,
    /// Singular-value grid `NxM`; repeat for several levels.
    #[arg(long = "svd-level", value_parser = parse_level)]
    pub svd_levels: Vec<(usize, usize)>,
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub skip_svd: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a system.
    Validate(Input),
    /// Sampled coefficient bounds and the a-priori growth bound.
    Extrema {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Per-component damping conditions and the contraction bound.
    CheckTh3 {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Decaying-coupling hypotheses on a finite window.
    CheckTh2 {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = defaults::TH2_WINDOW.0, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, default_value_t = defaults::TH2_WINDOW.1)]
        t1: f64,
        #[arg(long, value_delimiter = ',', default_value = defaults::TH2_EPS)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = defaults::EXTREMA_NX)]
        nx: usize,
        #[arg(long, default_value_t = defaults::TH2_NT)]
        nt: usize,
        /// JSON matrix of factors `b~_jk` (strings or null).
        #[arg(long)]
        factors: Option<PathBuf>,
    },
    /// Sign of the uniqueness integrals for large `|t|`.
    CheckUniqueness {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = defaults::UNIQUENESS_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = defaults::UNIQUENESS_SPAN)]
        span: f64,
        #[arg(long, default_value_t = defaults::UNIQUENESS_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = defaults::CHAR_STEP)]
        h: f64,
    },
    /// Propagate initial data with the evolution family.
    Simulate {
        #[command(flatten)]
        input: Input,
        /// Initial value of one component as an expression in x; one per component.
        #[arg(long = "init", required = true, allow_hyphen_values = true)]
        init: Vec<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = defaults::SIM_POINTS)]
        n_points: usize,
        /// Slab length, default `1 / n_points`.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = defaults::PICARD_TOL)]
        picard_tol: f64,
        #[arg(long, default_value_t = defaults::PICARD_MAX)]
        picard_max: usize,
        /// Record every k-th slab in the CSV output.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Detect or refute an exponential dichotomy.
    Dichotomy {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        detect: DetectArgs,
    },
    /// Bounded solution at one time through the Green's function.
    Green {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        detect: DetectArgs,
        /// Forcing of one component as an expression in x and t; one per component.
        #[arg(long = "forcing", required = true, allow_hyphen_values = true)]
        forcing: Vec<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        /// Integration half width around `t`.
        #[arg(long = "green-window", default_value_t = defaults::GREEN_WINDOW)]
        green_window: f64,
        #[arg(long, default_value_t = defaults::GREEN_STEP)]
        h: f64,
        #[arg(long, default_value_t = defaults::GREEN_TAIL_TOL)]
        tail_tol: f64,
    },
    /// First-order form of a second-order equation (second-order document).
    Reduce(Input),
}

fn parse_level(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got {s}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Usage,
    InvalidInput,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::InvalidInput => EXIT_INPUT,
            ErrorKind::Numerical => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), detail: None }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::InvalidInput, message)
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Numerical, message)
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<CharError> for CliError {
    fn from(e: CharError) -> Self {
        CliError::numerical(e.to_string())
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        match &e {
            EvolutionError::NonContraction { slab_start, slab_end, defect, iterations } => CliError {
                kind: ErrorKind::Numerical,
                message: e.to_string(),
                detail: Some(json!({
                    "slab_start": slab_start,
                    "slab_end": slab_end,
                    "defect": defect,
                    "iterations": iterations,
                })),
            },
            EvolutionError::Eval { .. } => CliError::input(e.to_string()),
            EvolutionError::Config(_) => CliError::usage(e.to_string()),
            EvolutionError::Char(_) | EvolutionError::Shape { .. } => CliError::numerical(e.to_string()),
        }
    }
}

impl From<ConditionError> for CliError {
    fn from(e: ConditionError) -> Self {
        match e {
            ConditionError::Char(c) => c.into(),
            ConditionError::Window(..) => CliError::usage(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<DichotomyError> for CliError {
    fn from(e: DichotomyError) -> Self {
        match e {
            DichotomyError::Char(c) => c.into(),
            DichotomyError::Evolution(v) => v.into(),
            DichotomyError::Config(_) | DichotomyError::WindowTooShort { .. } | DichotomyError::TooLarge { .. } => {
                CliError::usage(e.to_string())
            }
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<ReductionError> for CliError {
    fn from(e: ReductionError) -> Self {
        CliError::input(e.to_string())
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| CliError::input(format!("cannot read stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::input(format!("invalid {what} document: {e}")))
}

fn load_system(input: &Input) -> Result<HyperbolicSystem, CliError> {
    let doc: SystemDoc = parse_json(&read_input(&input.input)?, "system")?;
    Ok(validate_system(&doc)?)
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be at least {min}, got {v}")))
    }
}

fn grid_size(name: &str, v: usize) -> Result<(), CliError> {
    if v >= 16 && v.is_power_of_two() {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be a power of two and at least 16, got {v}")))
    }
}

fn slab(name: &str, dt: Option<f64>, n_points: usize) -> Result<f64, CliError> {
    let dt = dt.unwrap_or(1.0 / n_points as f64);
    positive(name, dt)?;
    Ok(dt)
}

fn sampling(s: &Sampling) -> Result<(), CliError> {
    at_least("nx", s.nx, 2)?;
    at_least("nt", s.nt, 2)
}

fn detect_config(d: &DetectArgs) -> Result<DichotomyConfig, CliError> {
    grid_size("n-points", d.n_points)?;
    slab("dt", d.dt, d.n_points)?;
    if let Some(p) = d.period {
        positive("period", p)?;
    }
    positive("window", d.window)?;
    positive("gap-tol", d.gap_tol)?;
    positive("singular-rtol", d.singular_rtol)?;
    for &(nx, nt) in &d.svd_levels {
        if nx < 2 || nt < 2 {
            return Err(CliError::usage(format!("--svd-level {nx}x{nt} is too coarse")));
        }
    }
    let mut cfg = DichotomyConfig {
        n_points: d.n_points,
        dt: d.dt,
        period: d.period,
        monodromy: MonodromyConfig { gap_tol: d.gap_tol, ..Default::default() },
        window: d.window,
        singular_rtol: d.singular_rtol,
        refine: !d.no_refine,
        skip_svd: d.skip_svd,
        ..Default::default()
    };
    if !d.svd_levels.is_empty() {
        cfg.svd_levels = d.svd_levels.clone();
    }
    Ok(cfg)
}

fn parse_exprs(name: &str, srcs: &[String], n: usize) -> Result<Vec<Expr>, CliError> {
    if srcs.len() != n {
        return Err(CliError::usage(format!("--{name} given {} times, the system has {n} components", srcs.len())));
    }
    srcs.iter()
        .map(|s| Expr::parse(s).map_err(|e| CliError::input(format!("cannot parse --{name} {s:?}: {e}"))))
        .collect()
}

fn sample_grid(exprs: &[Expr], points: usize, t: f64) -> Result<GridFunction, EvalError> {
    let mut err = None;
    let g = GridFunction::from_fn(exprs.len(), points, |j, x| match exprs[j].eval(x, t) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(g),
    }
}

/// A finished analysis: the JSON report and, where defined, a CSV table.
struct Output {
    report: Value,
    csv: Option<String>,
}

fn value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("report types serialize infallibly")
}

fn report(v: &impl Serialize) -> Output {
    Output { report: value(v), csv: None }
}

#[derive(Serialize)]
struct ValidateReport {
    valid: bool,
    system: SystemDoc,
    signature: SpeedSignature,
    autonomous: bool,
    decoupled: bool,
    constant: bool,
}

#[derive(Serialize)]
struct ExtremaOut {
    extrema: ExtremaReport,
    exp_bound: ExpBound,
}

#[derive(Serialize)]
struct Th3Out {
    extrema: ExtremaReport,
    theorem: ConditionReport,
    corollary: CorollaryReport,
    verdict: crate::conditions::Verdict,
}

#[derive(Serialize)]
struct Th2Out {
    extrema: ExtremaReport,
    report: ConditionReport,
}

#[derive(Serialize)]
struct UniquenessOut {
    report: UniquenessReport,
}

#[derive(Serialize)]
struct SimulateOut {
    from: f64,
    to: f64,
    n_points: usize,
    dt: f64,
    slabs: usize,
    sup_initial: f64,
    sup_final: f64,
    exp_bound: ExpBound,
    /// `exp(omega |to - from|)` with the a-priori rate.
    growth_bound: f64,
    final_state: GridFunction,
}

#[derive(Serialize)]
struct GreenOut {
    dichotomy: DichotomyReport,
    green: Option<GreenResult>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct ReduceOut {
    system: SystemDoc,
    signature: SpeedSignature,
    theorem: ConditionReport,
    /// Constant-coefficient inequalities, when `a`, `a1`, `a2` are constants.
    trichotomy: Option<TrichotomyReport>,
}

fn fit_csv(r: &DichotomyReport) -> String {
    let mut s = String::from("gap,log_norm\n");
    if let Some(fit) = &r.fit {
        for &(g, v) in &fit.samples {
            s.push_str(&format!("{g:.16e},{:.16e}\n", v.max(f64::MIN_POSITIVE).ln()));
        }
    }
    s
}

fn dispatch(cmd: &Command) -> Result<Output, CliError> {
    match cmd {
        Command::Validate(input) => {
            let sys = load_system(input)?;
            Ok(report(&ValidateReport {
                valid: true,
                system: sys.to_doc(),
                signature: sys.signature().clone(),
                autonomous: sys.is_autonomous(),
                decoupled: sys.is_decoupled(),
                constant: sys.is_constant(),
            }))
        }
        Command::Extrema { input, sampling: s } => {
            sampling(s)?;
            let sys = load_system(input)?;
            let ext = compute_extrema(&sys, s.nx, s.nt)?;
            let eb = exp_bound(&ext, sys.n());
            Ok(report(&ExtremaOut { extrema: ext, exp_bound: eb }))
        }
        Command::CheckTh3 { input, sampling: s } => {
            sampling(s)?;
            let sys = load_system(input)?;
            let ext = compute_extrema(&sys, s.nx, s.nt)?;
            let theorem = theorem3_check(&sys, &ext)?;
            let corollary = corollary_check(&sys, &ext)?;
            let verdict = theorem.verdict;
            Ok(report(&Th3Out { extrema: ext, theorem, corollary, verdict }))
        }
        Command::CheckTh2 { input, t0, t1, eps, nx, nt, factors } => {
            at_least("nx", *nx, 2)?;
            at_least("nt", *nt, 2)?;
            if eps.is_empty() {
                return Err(CliError::usage("--eps needs at least one value"));
            }
            for &e in eps {
                positive("eps", e)?;
            }
            let sys = load_system(input)?;
            let factors = match factors {
                Some(p) => Some(parse_json::<Vec<Vec<Option<String>>>>(&read_input(p)?, "factor")?),
                None => None,
            };
            let cfg = DecayCouplingConfig { window: (*t0, *t1), eps_grid: eps.clone(), n_x: *nx, n_t: *nt, factors };
            let ext = compute_extrema(&sys, defaults::EXTREMA_NX, defaults::EXTREMA_NT)?;
            let r = theorem2_check(&sys, &ext, &cfg)?;
            Ok(report(&Th2Out { extrema: ext, report: r }))
        }
        Command::CheckUniqueness { input, threshold, span, samples, h } => {
            if !(threshold.is_finite() && *threshold >= 0.0) {
                return Err(CliError::usage(format!("--threshold must be finite and non-negative, got {threshold}")));
            }
            positive("span", *span)?;
            positive("h", *h)?;
            at_least("samples", *samples, 2)?;
            let sys = load_system(input)?;
            let cfg = CharConfig { h: *h, ..Default::default() };
            let r = uniqueness_report(&sys, *threshold, *span, *samples, &cfg)?;
            Ok(report(&UniquenessOut { report: r }))
        }
        Command::Simulate { input, init, from, to, n_points, dt, picard_tol, picard_max, every } => {
            grid_size("n-points", *n_points)?;
            let dt = slab("dt", *dt, *n_points)?;
            positive("picard-tol", *picard_tol)?;
            at_least("picard-max", *picard_max, 1)?;
            at_least("every", *every, 1)?;
            if !(from.is_finite() && to.is_finite()) {
                return Err(CliError::usage("--from and --to must be finite"));
            }
            let sys = load_system(input)?;
            let exprs = parse_exprs("init", init, sys.n())?;
            let u0 = sample_grid(&exprs, *n_points, *from)
                .map_err(|e| CliError::input(format!("initial data cannot be evaluated: {e}")))?;
            let cfg = EvolutionConfig {
                n_points: *n_points,
                dt,
                picard_tol: *picard_tol,
                picard_max: *picard_max,
                ..Default::default()
            };
            let evo = Evolution::new(&sys, cfg)?;
            let (out, snaps) = simulate(&evo, *to, *from, &u0, *every)?;
            let ext = compute_extrema(&sys, defaults::EXTREMA_NX, defaults::EXTREMA_NT)?;
            let eb = exp_bound(&ext, sys.n());
            let mut csv = GridFunction::csv_header(sys.n());
            u0.to_csv_rows(*from, &mut csv);
            for (t, g) in &snaps {
                g.to_csv_rows(*t, &mut csv);
            }
            let r = SimulateOut {
                from: *from,
                to: *to,
                n_points: *n_points,
                dt,
                slabs: evo.slab_points(*from, *to).len().saturating_sub(1),
                sup_initial: u0.sup_norm(),
                sup_final: out.sup_norm(),
                exp_bound: eb,
                growth_bound: (eb.omega * (to - from).abs()).exp(),
                final_state: out,
            };
            Ok(Output { report: value(&r), csv: Some(csv) })
        }
        Command::Dichotomy { input, detect: d } => {
            let cfg = detect_config(d)?;
            let sys = load_system(input)?;
            let r = detect(&sys, &cfg)?;
            Ok(Output { report: value(&r), csv: Some(fit_csv(&r)) })
        }
        Command::Green { input, detect: d, forcing, t, green_window, h, tail_tol } => {
            let cfg = detect_config(d)?;
            positive("green-window", *green_window)?;
            positive("h", *h)?;
            positive("tail-tol", *tail_tol)?;
            if !t.is_finite() {
                return Err(CliError::usage("--t must be finite"));
            }
            let dt = slab("dt", d.dt, d.n_points)?;
            let ratio = h / dt;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return Err(CliError::usage(format!("--h {h} must be a multiple of the slab length {dt}")));
            }
            let sys = load_system(input)?;
            let exprs = parse_exprs("forcing", forcing, sys.n())?;
            let rep = detect(&sys, &cfg)?;
            let mut notes = Vec::new();
            let constants = rep.fit.as_ref().map(|f| (f.m, f.omega));
            let green = match (&rep.projection, constants) {
                (Some(p), Some((m, omega))) if rep.verdict == DichotomyVerdict::Dichotomy => {
                    let evo = Evolution::new(&sys, EvolutionConfig::with_grid(d.n_points, dt))?;
                    let failure = Mutex::new(None);
                    let f = |s: f64| {
                        sample_grid(&exprs, d.n_points, s).unwrap_or_else(|e| {
                            failure.lock().expect("no panics while sampling").get_or_insert(e);
                            GridFunction::zeros(exprs.len(), d.n_points)
                        })
                    };
                    let gcfg = GreenConfig { window: *green_window, h: *h, tail_tol: *tail_tol, m, omega };
                    let g = greens_apply(&evo, p, &f, *t, &gcfg)?;
                    if let Some(e) = failure.into_inner().expect("no panics while sampling") {
                        return Err(CliError::input(format!("forcing cannot be evaluated: {e}")));
                    }
                    Some(g)
                }
                _ => {
                    notes.push(format!("no Green's function: dichotomy verdict is {:?}", rep.verdict));
                    None
                }
            };
            Ok(report(&GreenOut { dichotomy: rep, green, notes }))
        }
        Command::Reduce(input) => {
            let doc: SecondOrderDoc = parse_json(&read_input(&input.input)?, "second-order")?;
            let sys = reduce_doc(&doc)?;
            let ext = compute_extrema(&sys, defaults::EXTREMA_NX, defaults::EXTREMA_NT)?;
            let theorem = theorem3_check(&sys, &ext)?;
            let consts = [&doc.a, &doc.a1, &doc.a2].map(|s| Expr::parse(s).ok().and_then(|e| e.fold_constants().as_const()));
            let trichotomy = match consts {
                [Some(a), Some(a1), Some(a2)] => Some(trichotomy_const_check(a, a1, a2)?),
                _ => None,
            };
            Ok(report(&ReduceOut { system: sys.to_doc(), signature: sys.signature().clone(), theorem, trichotomy }))
        }
    }
}

fn emit(cli: &Cli, out: Output, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = match cli.format {
        Format::Json => to_json(&out.report) + "\n",
        Format::Pretty => to_json_pretty(&out.report) + "\n",
        Format::Csv => out.csv.ok_or_else(|| CliError::usage("--format csv is available for simulate and dichotomy"))?,
    };
    match &cli.output {
        Some(p) => fs::write(p, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::usage(format!("cannot write stdout: {e}"))),
    }
}

fn fail(err: &CliError, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "{}", to_json(&json!({ "error": err })));
    err.kind.exit_code()
}

/// Runs one command line, writing the report and errors to the given streams.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stdout, "{e}");
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { EXIT_USAGE } else { EXIT_OK };
            }
            return fail(&CliError::usage(e.to_string().trim_end()), stderr);
        }
    };
    match dispatch(&cli.command).and_then(|out| emit(&cli, out, stdout)) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&e, stderr),
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}
