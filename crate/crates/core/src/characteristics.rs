//! Characteristic curves of each component and the weights built on them.
//!
//! `xi_j(tau; x, t)` follows `d xi / d tau = a_j(xi, tau)` through `(x, t)`,
//! `tau_j(xi; x, t)` is the same curve parametrised by position,
//! `d tau / d xi = 1 / a_j(xi, tau)`.

use serde::Serialize;
use thiserror::Error;

use crate::coefficients::HyperbolicSystem;
use crate::expr::EvalError;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    /// Classical fixed-step Runge-Kutta.
    Rk4,
    /// Dormand-Prince 5(4) with step control.
    Rk45,
}

#[derive(Debug, Clone, Copy)]
pub struct CharConfig {
    pub method: Method,
    /// Step for `Rk4`, initial step for `Rk45`.
    pub h: f64,
    /// Local error tolerance for `Rk45`.
    pub tol: f64,
    /// Smallest step `Rk45` may take before giving up.
    pub h_min: f64,
}

impl Default for CharConfig {
    fn default() -> Self {
        CharConfig { method: Method::Rk4, h: 1.0 / 1024.0, tol: 1e-10, h_min: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parametrization {
    /// Nodes are `(tau, xi)`.
    ByTau,
    /// Nodes are `(xi, tau)`.
    ByXi,
}

/// Sampled characteristic through `(x, t)`.
#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicPath {
    pub component: usize,
    pub x: f64,
    pub t: f64,
    pub parametrization: Parametrization,
    /// Integration variable at each node.
    pub s: Vec<f64>,
    /// Solution at each node.
    pub y: Vec<f64>,
}

impl CharacteristicPath {
    pub fn end(&self) -> f64 {
        *self.y.last().expect("path has at least one node")
    }

    /// `(xi, tau)` at every node.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.s.iter().zip(&self.y).map(move |(&s, &y)| match self.parametrization {
            Parametrization::ByXi => (s, y),
            Parametrization::ByTau => (y, s),
        })
    }

    pub fn to_csv(&self) -> String {
        let (ps, vs) = match self.parametrization {
            Parametrization::ByTau => ("tau", "xi"),
            Parametrization::ByXi => ("xi", "tau"),
        };
        let mut out = format!("{ps},{vs}\n");
        for (s, y) in self.s.iter().zip(&self.y) {
            out.push_str(&format!("{s:.17e},{y:.17e}\n"));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum CharError {
    #[error("coefficient evaluation failed at xi={xi}, tau={tau}: {source}")]
    Eval { xi: f64, tau: f64, source: EvalError },
    #[error("characteristic solver step fell below {h_min:e} after {} nodes", partial.s.len())]
    StepUnderflow { h_min: f64, partial: Box<CharacteristicPath> },
    #[error("characteristic solution is not finite at s={s}")]
    NonFinite { s: f64 },
    #[error("component index {0} out of range")]
    Component(usize),
}

type Rhs<'a> = dyn Fn(f64, f64) -> Result<f64, CharError> + 'a;

fn rk4(f: &Rhs<'_>, s0: f64, y0: f64, s1: f64, h: f64) -> Result<(Vec<f64>, Vec<f64>), CharError> {
    let len = s1 - s0;
    if len == 0.0 {
        return Ok((vec![s0], vec![y0]));
    }
    // even step count so Simpson applies on the nodes
    let n = (2.0 * (len.abs() / (2.0 * h) - 1e-9).ceil()).max(2.0) as usize;
    let step = len / n as f64;
    let mut s = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    s.push(s0);
    y.push(y0);
    let mut yk = y0;
    for k in 0..n {
        let sk = s0 + len * (k as f64 / n as f64);
        let k1 = f(sk, yk)?;
        let k2 = f(sk + 0.5 * step, yk + 0.5 * step * k1)?;
        let k3 = f(sk + 0.5 * step, yk + 0.5 * step * k2)?;
        let k4 = f(sk + step, yk + step * k3)?;
        yk += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !yk.is_finite() {
            return Err(CharError::NonFinite { s: sk + step });
        }
        s.push(if k + 1 == n { s1 } else { s0 + len * ((k + 1) as f64 / n as f64) });
        y.push(yk);
    }
    Ok((s, y))
}

#[allow(clippy::too_many_arguments)]
fn rk45(
    f: &Rhs<'_>,
    s0: f64,
    y0: f64,
    s1: f64,
    h0: f64,
    tol: f64,
    h_min: f64,
    partial: impl Fn(Vec<f64>, Vec<f64>) -> CharacteristicPath,
) -> Result<(Vec<f64>, Vec<f64>), CharError> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut s = vec![s0];
    let mut y = vec![y0];
    if s1 == s0 {
        return Ok((s, y));
    }
    let dir = (s1 - s0).signum();
    let mut h = h0.abs().min((s1 - s0).abs());
    let (mut sc, mut yc) = (s0, y0);
    while (s1 - sc) * dir > 0.0 {
        if h < h_min {
            return Err(CharError::StepUnderflow { h_min, partial: Box::new(partial(s, y)) });
        }
        let h_step = h.min((s1 - sc).abs());
        let hs = dir * h_step;
        let mut k = [0.0f64; 7];
        for i in 0..7 {
            let mut yi = yc;
            for (jj, kj) in k.iter().enumerate().take(i) {
                yi += hs * A[i][jj] * kj;
            }
            k[i] = f(sc + C[i] * hs, yi)?;
        }
        let mut y5 = yc;
        let mut err = 0.0;
        for i in 0..7 {
            y5 += hs * A[6][i.min(5)] * if i < 6 { k[i] } else { 0.0 };
            err += hs * E[i] * k[i];
        }
        let scale = tol * (1.0 + yc.abs().max(y5.abs()));
        let ratio = err.abs() / scale;
        if ratio <= 1.0 {
            sc = if h_step == (s1 - sc).abs() { s1 } else { sc + hs };
            yc = y5;
            if !yc.is_finite() {
                return Err(CharError::NonFinite { s: sc });
            }
            s.push(sc);
            y.push(yc);
        }
        let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_step * fac;
    }
    Ok((s, y))
}

fn solve(
    f: &Rhs<'_>,
    s0: f64,
    y0: f64,
    s1: f64,
    cfg: &CharConfig,
    partial: impl Fn(Vec<f64>, Vec<f64>) -> CharacteristicPath,
) -> Result<(Vec<f64>, Vec<f64>), CharError> {
    match cfg.method {
        Method::Rk4 => rk4(f, s0, y0, s1, cfg.h),
        Method::Rk45 => rk45(f, s0, y0, s1, cfg.h, cfg.tol, cfg.h_min, partial),
    }
}

fn check_component(sys: &HyperbolicSystem, j: usize) -> Result<(), CharError> {
    if j >= sys.n() {
        Err(CharError::Component(j))
    } else {
        Ok(())
    }
}

/// Eval error wrapper at a characteristic point.
pub(crate) fn at(xi: f64, tau: f64) -> impl Fn(EvalError) -> CharError {
    move |source| CharError::Eval { xi, tau, source }
}

/// Characteristic through `(x, t)` parametrised by time, from `t` to `tau_end`.
pub fn xi_path(
    sys: &HyperbolicSystem,
    j: usize,
    x: f64,
    t: f64,
    tau_end: f64,
    cfg: &CharConfig,
) -> Result<CharacteristicPath, CharError> {
    check_component(sys, j)?;
    let f = |tau: f64, xi: f64| sys.a(j, xi, tau).map_err(at(xi, tau));
    let mk = |s, y| CharacteristicPath {
        component: j,
        x,
        t,
        parametrization: Parametrization::ByTau,
        s,
        y,
    };
    let (s, y) = solve(&f, t, x, tau_end, cfg, mk)?;
    Ok(mk(s, y))
}

/// Characteristic through `(x, t)` parametrised by position, from `x` to `xi_end`.
pub fn tau_path(
    sys: &HyperbolicSystem,
    j: usize,
    x: f64,
    t: f64,
    xi_end: f64,
    cfg: &CharConfig,
) -> Result<CharacteristicPath, CharError> {
    check_component(sys, j)?;
    let f = |xi: f64, tau: f64| Ok(1.0 / sys.a(j, xi, tau).map_err(at(xi, tau))?);
    let mk = |s, y| CharacteristicPath {
        component: j,
        x,
        t,
        parametrization: Parametrization::ByXi,
        s,
        y,
    };
    let (s, y) = solve(&f, x, t, xi_end, cfg, mk)?;
    Ok(mk(s, y))
}

/// `xi_j(tau; x, t)`.
pub fn xi(
    sys: &HyperbolicSystem,
    j: usize,
    tau: f64,
    x: f64,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, CharError> {
    Ok(xi_path(sys, j, x, t, tau, cfg)?.end())
}

/// `tau_j(xi; x, t)`.
pub fn tau(
    sys: &HyperbolicSystem,
    j: usize,
    xi: f64,
    x: f64,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, CharError> {
    Ok(tau_path(sys, j, x, t, xi, cfg)?.end())
}

/// Oriented integral `int_{path start}^{path end} g(xi, tau)` in the path variable.
pub fn path_integral(
    path: &CharacteristicPath,
    g: impl Fn(f64, f64) -> Result<f64, EvalError>,
) -> Result<f64, CharError> {
    let vals = path_values(path, g)?;
    Ok(quad::total(&path.s, &vals))
}

/// Running integral of `g` from the first node to every node.
pub fn path_cumulative(
    path: &CharacteristicPath,
    g: impl Fn(f64, f64) -> Result<f64, EvalError>,
) -> Result<Vec<f64>, CharError> {
    let vals = path_values(path, g)?;
    Ok(quad::cumulative(&path.s, &vals))
}

fn path_values(
    path: &CharacteristicPath,
    g: impl Fn(f64, f64) -> Result<f64, EvalError>,
) -> Result<Vec<f64>, CharError> {
    path.points()
        .map(|(xi, tau)| g(xi, tau).map_err(at(xi, tau)))
        .collect()
}

/// `c_j(xi, x, t) = exp(-int_xi^x (b_jj / a_j)(eta, tau_j(eta)) d eta)`.
pub fn weight_c(
    sys: &HyperbolicSystem,
    j: usize,
    xi: f64,
    x: f64,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, CharError> {
    let path = tau_path(sys, j, x, t, xi, cfg)?;
    // the path runs from x to xi, so its integral is -int_xi^x
    let i = path_integral(&path, |e, s| Ok(sys.b(j, j, e, s)? / sys.a(j, e, s)?))?;
    Ok(i.exp())
}

/// `d_j(xi, x, t) = c_j(xi, x, t) / a_j(xi, tau_j(xi; x, t))`.
pub fn weight_d(
    sys: &HyperbolicSystem,
    j: usize,
    xi: f64,
    x: f64,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, CharError> {
    let path = tau_path(sys, j, x, t, xi, cfg)?;
    let i = path_integral(&path, |e, s| Ok(sys.b(j, j, e, s)? / sys.a(j, e, s)?))?;
    let end = path.end();
    Ok(i.exp() / sys.a(j, xi, end).map_err(at(xi, end))?)
}

fn sensitivity(
    sys: &HyperbolicSystem,
    j: usize,
    xi: f64,
    x: f64,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, CharError> {
    let path = tau_path(sys, j, x, t, xi, cfg)?;
    let i = path_integral(&path, |e, s| {
        let a = sys.a(j, e, s)?;
        Ok(sys.a_t(j, e, s)? / (a * a))
    })?;
    // exp(int_xi^x a_t / a^2) = exp(-i)
    Ok((-i).exp())
}

/// `d tau_j(xi; x, t) / d x`.
pub fn dtau_dx(
    sys: &HyperbolicSystem,
    j: usize,
    xi: f64,
    x: f64,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, CharError> {
    let e = sensitivity(sys, j, xi, x, t, cfg)?;
    Ok(-e / sys.a(j, x, t).map_err(at(x, t))?)
}

/// `d tau_j(xi; x, t) / d t`.
pub fn dtau_dt(
    sys: &HyperbolicSystem,
    j: usize,
    xi: f64,
    x: f64,
    t: f64,
    cfg: &CharConfig,
) -> Result<f64, CharError> {
    sensitivity(sys, j, xi, x, t, cfg)
}
