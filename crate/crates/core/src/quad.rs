//! Quadrature on path nodes and on uniform grids.

/// Integral over `[a, b]` of the quadratic through three nodes.
pub fn quad3(x: [f64; 3], f: [f64; 3], a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    let basis = |i: usize, s: f64| {
        let mut p = 1.0;
        for k in 0..3 {
            if k != i {
                p *= (s - x[k]) / (x[i] - x[k]);
            }
        }
        p
    };
    let mut acc = 0.0;
    for i in 0..3 {
        acc += f[i] * (basis(i, a) + 4.0 * basis(i, m) + basis(i, b));
    }
    acc * (b - a) / 6.0
}

/// Running integral `out[k] = int_{s[0]}^{s[k]} f` on arbitrary nodes.
///
/// Even indices carry composite Simpson sums, odd ones add a single
/// quadratic panel.
pub fn cumulative(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (s[1] - s[0]) * (f[0] + f[1]);
        return out;
    }
    for k in 1..n {
        if k % 2 == 0 {
            out[k] = out[k - 2]
                + quad3(
                    [s[k - 2], s[k - 1], s[k]],
                    [f[k - 2], f[k - 1], f[k]],
                    s[k - 2],
                    s[k],
                );
        } else {
            let (i0, i1, i2) = if k + 1 < n { (k - 1, k, k + 1) } else { (k - 2, k - 1, k) };
            out[k] = out[k - 1]
                + quad3([s[i0], s[i1], s[i2]], [f[i0], f[i1], f[i2]], s[k - 1], s[k]);
        }
    }
    out
}

/// Integral over all nodes, composite Simpson when the interval count is even.
pub fn total(s: &[f64], f: &[f64]) -> f64 {
    match s.len() {
        0 | 1 => 0.0,
        2 => 0.5 * (s[1] - s[0]) * (f[0] + f[1]),
        n => {
            let mut acc = 0.0;
            let mut k = 0;
            while k + 2 < n {
                acc += quad3([s[k], s[k + 1], s[k + 2]], [f[k], f[k + 1], f[k + 2]], s[k], s[k + 2]);
                k += 2;
            }
            if k + 1 < n {
                acc += quad3(
                    [s[k - 1], s[k], s[k + 1]],
                    [f[k - 1], f[k], f[k + 1]],
                    s[k],
                    s[k + 1],
                );
            }
            acc
        }
    }
}

/// Weights (in units of the spacing) for `int_0^{L h}` on nodes `0..=L`.
///
/// `L = 1` uses the cubic through nodes `0..=3`, so the returned vector has
/// four entries in that case.
pub fn uniform_weights(l: usize) -> Vec<f64> {
    match l {
        0 => vec![0.0],
        1 => vec![9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
        _ => {
            let mut w = vec![0.0; l + 1];
            let simpson_end = if l % 2 == 0 { l } else { l - 3 };
            let mut k = 0;
            while k < simpson_end {
                w[k] += 1.0 / 3.0;
                w[k + 1] += 4.0 / 3.0;
                w[k + 2] += 1.0 / 3.0;
                k += 2;
            }
            if l % 2 == 1 {
                let b = l - 3;
                w[b] += 3.0 / 8.0;
                w[b + 1] += 9.0 / 8.0;
                w[b + 2] += 9.0 / 8.0;
                w[b + 3] += 3.0 / 8.0;
            }
            w
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad3_is_exact_for_cubics_on_symmetric_panels() {
        let x = [0.0, 0.5, 1.0];
        let f = |s: f64| s * s * s - 2.0 * s + 1.0;
        let v = quad3(x, [f(0.0), f(0.5), f(1.0)], 0.0, 1.0);
        assert!((v - (0.25 - 1.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn cumulative_matches_exp_on_descending_nodes() {
        let n = 65;
        let s: Vec<f64> = (0..n).map(|k| 1.0 - k as f64 / (n - 1) as f64).collect();
        let f: Vec<f64> = s.iter().map(|v| v.exp()).collect();
        let c = cumulative(&s, &f);
        for k in 0..n {
            let exact = s[k].exp() - s[0].exp();
            assert!((c[k] - exact).abs() < 1e-8, "k={k}");
        }
        assert!((total(&s, &f) - c[n - 1]).abs() < 1e-14);
    }

    #[test]
    fn uniform_weights_integrate_quadratics() {
        for l in 1..12usize {
            let w = uniform_weights(l);
            let h = 0.1;
            let v: f64 = w
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * h * (1.0 + (k as f64 * h).powi(2)))
                .sum();
            let b = l as f64 * h;
            assert!((v - (b + b.powi(3) / 3.0)).abs() < 1e-13, "l={l}");
        }
    }
}
