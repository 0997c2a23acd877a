//! Dense and iterative linear algebra used by the dichotomy routes.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;

pub fn inf_norm(a: &Mat<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..a.nrows() {
        let mut s = 0.0;
        for j in 0..a.ncols() {
            s += a[(i, j)].abs();
        }
        best = best.max(s);
    }
    best
}

pub fn max_abs(a: &Mat<f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

pub fn frob(a: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

pub fn mat_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn mat_t_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)] * x[i]).sum())
        .collect()
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn seeded(n: usize) -> Vec<f64> {
    // deterministic, not aligned with grid structure
    (0..n).map(|i| ((i as f64 + 1.0) * 0.754_877_666_246_692_8).fract() - 0.5).collect()
}

/// Largest singular value by power iteration on `A^T A`.
pub fn norm2_estimate(apply: impl Fn(&[f64]) -> Vec<f64>, apply_t: impl Fn(&[f64]) -> Vec<f64>, n: usize) -> f64 {
    let mut x = seeded(n);
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = 0.0;
    for _ in 0..60 {
        let y = apply_t(&apply(&x));
        let ny = norm2(&y);
        if ny == 0.0 {
            return 0.0;
        }
        let s = ny.sqrt();
        x = y.into_iter().map(|v| v / ny).collect();
        if (s - sigma).abs() <= 1e-10 * s {
            return s;
        }
        sigma = s;
    }
    sigma
}

/// Smallest singular value and spectral norm of a dense square matrix.
///
/// Inverse iteration on `(A^T A)^{-1}` through one LU factorization.
pub fn sigma_min_dense(a: &Mat<f64>) -> (f64, f64) {
    let n = a.nrows();
    let norm = norm2_estimate(|x| mat_vec(a, x), |x| mat_t_vec(a, x), n);
    let lu = a.partial_piv_lu();
    let mut x = Mat::<f64>::from_fn(n, 1, |i, _| seeded(n)[i]);
    let nx = frob(&x);
    for i in 0..n {
        x[(i, 0)] /= nx;
    }
    let mut lam = 0.0f64;
    for _ in 0..200 {
        // y = A^{-1} A^{-T} x
        lu.solve_transpose_in_place(&mut x);
        lu.solve_in_place(&mut x);
        let ny = frob(&x);
        if !ny.is_finite() {
            return (0.0, norm);
        }
        for i in 0..n {
            x[(i, 0)] /= ny;
        }
        if (ny - lam).abs() <= 1e-9 * ny {
            lam = ny;
            break;
        }
        lam = ny;
    }
    (1.0 / lam.sqrt(), norm)
}

/// Result of a Krylov solve.
#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Restarted right-preconditioned GMRES for `A x = b`.
pub fn gmres(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_m: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovResult {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return KrylovResult { x: vec![0.0; n], relative_residual: 0.0, iterations: 0, converged: true };
    }
    let mut x = vec![0.0; n];
    let mut total = 0usize;
    let mut rel = 1.0;
    while total < max_iter {
        let ax = apply_a(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return KrylovResult { x, relative_residual: rel, iterations: total, converged: true };
        }
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let zk = apply_m(&v[k]);
            let mut w = apply_a(&zk);
            z.push(zk);
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if den == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / den;
                sn[k] = h[k + 1][k] / den;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
        if rel <= tol {
            let ax = apply_a(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            rel = norm2(&r) / bnorm;
            if rel <= 10.0 * tol {
                return KrylovResult { x, relative_residual: rel, iterations: total, converged: true };
            }
        }
    }
    KrylovResult { x, relative_residual: rel, iterations: total, converged: false }
}

/// Matrix sign function by scaled Newton iteration. `None` when it fails to
/// converge, which happens when eigenvalues sit on or near the imaginary axis.
pub fn matrix_sign(z: &Mat<f64>, max_iter: usize) -> Option<Mat<f64>> {
    let n = z.nrows();
    let mut x = z.clone();
    for _ in 0..max_iter {
        let inv = x.partial_piv_lu().inverse();
        let (nx, ni) = (frob(&x), frob(&inv));
        if !(nx.is_finite() && ni.is_finite()) || ni == 0.0 {
            return None;
        }
        let gamma = (ni / nx).sqrt();
        let next = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (gamma * x[(i, j)] + inv[(i, j)] / gamma));
        let diff = frob(&(&next - &x));
        let scale = frob(&next);
        x = next;
        if diff <= 1e-12 * scale {
            return Some(x);
        }
    }
    None
}

/// Orthonormal basis of the column space, dropping directions with singular
/// values below `rtol` times the largest one.
pub fn orth(a: &Mat<f64>, rtol: f64) -> Mat<f64> {
    let svd = match a.thin_svd() {
        Ok(s) => s,
        Err(_) => return Mat::zeros(a.nrows(), 0),
    };
    let s = svd.S().column_vector();
    let top = if s.nrows() > 0 { s[0] } else { 0.0 };
    let r = (0..s.nrows()).filter(|&i| s[i] > rtol * top && top > 0.0).count();
    let u = svd.U();
    Mat::from_fn(a.nrows(), r, |i, j| u[(i, j)])
}

/// Largest principal angle (radians) between the column spaces of `a` and `b`.
pub fn max_principal_angle(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let qa = orth(a, 1e-10);
    let qb = orth(b, 1e-10);
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let m = qa.transpose() * &qb;
    let sv = m.singular_values().unwrap_or_default();
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    smin.acos()
}
