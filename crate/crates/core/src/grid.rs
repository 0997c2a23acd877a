//! Vector-valued functions on a uniform periodic grid `x_i = i / N`.

use serde::Serialize;

/// Values of `n` components on `N` periodic nodes, stored component-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    n: usize,
    points: usize,
    data: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(n: usize, points: usize) -> Self {
        GridFunction { n, points, data: vec![0.0; n * points] }
    }

    pub fn from_fn(n: usize, points: usize, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * points);
        for j in 0..n {
            for i in 0..points {
                data.push(f(j, i as f64 / points as f64));
            }
        }
        GridFunction { n, points, data }
    }

    pub fn from_vec(n: usize, points: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * points, "grid data has wrong length");
        GridFunction { n, points, data }
    }

    /// Unit vector at flat index `r = j * N + i`.
    pub fn unit(n: usize, points: usize, r: usize) -> Self {
        let mut g = Self::zeros(n, points);
        g.data[r] = 1.0;
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.points as f64
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.points + i]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, v: f64) {
        self.data[j * self.points + i] = v;
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.data[j * self.points..(j + 1) * self.points]
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dist_sup(&self, other: &GridFunction) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &GridFunction) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    /// Periodic cubic interpolation of component `j` at `x`.
    pub fn interp(&self, j: usize, x: f64) -> f64 {
        let st = Stencil::cubic(x, self.points);
        let c = self.component(j);
        st.idx.iter().zip(&st.w).map(|(&i, &w)| w * c[i as usize]).sum()
    }

    /// Rows `t, x, u_1, .., u_n` for every node.
    pub fn to_csv_rows(&self, t: f64, out: &mut String) {
        for i in 0..self.points {
            out.push_str(&format!("{t:.17e},{:.17e}", self.x(i)));
            for j in 0..self.n {
                out.push_str(&format!(",{:.17e}", self.get(j, i)));
            }
            out.push('\n');
        }
    }

    pub fn csv_header(n: usize) -> String {
        let mut h = String::from("t,x");
        for j in 1..=n {
            h.push_str(&format!(",u_{j}"));
        }
        h.push('\n');
        h
    }
}

/// Four-point periodic interpolation stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub idx: [u32; 4],
    pub w: [f64; 4],
}

/// Offsets closer than this (in grid units) to a node snap onto it.
const SNAP: f64 = 1e-11;

impl Stencil {
    pub fn cubic(x: f64, points: usize) -> Stencil {
        let s = x * points as f64;
        let mut base = s.floor();
        let mut p = s - base;
        if p < SNAP {
            p = 0.0;
        } else if 1.0 - p < SNAP {
            p = 0.0;
            base += 1.0;
        }
        let nn = points as i64;
        let b = (base as i64).rem_euclid(nn);
        let idx = [
            (b - 1).rem_euclid(nn) as u32,
            b as u32,
            (b + 1).rem_euclid(nn) as u32,
            (b + 2).rem_euclid(nn) as u32,
        ];
        let w = [
            -p * (p - 1.0) * (p - 2.0) / 6.0,
            (p + 1.0) * (p - 1.0) * (p - 2.0) / 2.0,
            -(p + 1.0) * p * (p - 2.0) / 2.0,
            (p + 1.0) * p * (p - 1.0) / 6.0,
        ];
        Stencil { idx, w }
    }
}
