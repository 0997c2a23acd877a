//! Grid matrices of the evolution family.

use faer::Mat;

use crate::evolution::{Evolution, EvolutionError};
use crate::grid::GridFunction;

use super::linalg::mat_vec;

pub fn basis(n: usize, points: usize) -> Vec<GridFunction> {
    (0..n * points).map(|r| GridFunction::unit(n, points, r)).collect()
}

pub fn to_mat(cols: &[GridFunction]) -> Mat<f64> {
    let dim = cols.first().map(|c| c.as_slice().len()).unwrap_or(0);
    Mat::from_fn(dim, cols.len(), |i, j| cols[j].as_slice()[i])
}

pub fn apply_mat(m: &Mat<f64>, u: &GridFunction) -> GridFunction {
    GridFunction::from_vec(u.n(), u.points(), mat_vec(m, u.as_slice()))
}

/// Matrix of `U(t, s)`.
pub fn propagator(evo: &Evolution<'_>, t: f64, s: f64) -> Result<Mat<f64>, EvolutionError> {
    let mut cols = basis(evo.system().n(), evo.points());
    evo.apply_many(t, s, &mut cols)?;
    Ok(to_mat(&cols))
}

/// Matrices of `U(t_k, s)` for times on one side of `s`, in one sweep.
///
/// Requested times must be slab boundaries (multiples of `dt`) or the end time.
pub fn propagator_snapshots(
    evo: &Evolution<'_>,
    s: f64,
    times: &[f64],
) -> Result<Vec<Mat<f64>>, EvolutionError> {
    let far = times.iter().cloned().fold(s, |acc, t| if (t - s).abs() > (acc - s).abs() { t } else { acc });
    let mut out: Vec<Option<Mat<f64>>> = vec![None; times.len()];
    let mut cols = basis(evo.system().n(), evo.points());
    let tol = 1e-9 * evo.config().dt;
    evo.apply_many_with(far, s, &mut cols, |time, state| {
        for (k, &t) in times.iter().enumerate() {
            if out[k].is_none() && (t - time).abs() <= tol {
                out[k] = Some(to_mat(state));
            }
        }
    })?;
    out.into_iter()
        .zip(times)
        .map(|(m, t)| {
            m.ok_or_else(|| EvolutionError::Config(format!("time {t} is not a slab boundary")))
        })
        .collect()
}
