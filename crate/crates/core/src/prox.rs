//! Proximal operators `v -> argmin_x 1/2 ||x - v||^2 + t * penalty(x)`.
//!
//! A scale of zero is the identity map for every operator here.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::model::RegWeights;

/// Prox of `t * |.|`.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Entry `(j, i)` is soft-thresholded at `t * weights[j]`.
pub fn weighted_l1_prox(v: ArrayView2<'_, f64>, weights: &RegWeights, t: f64) -> Result<Array2<f64>> {
    if weights.len() != v.nrows() {
        return Err(Error::contract(format!(
            "{} feature weights for a matrix with {} rows",
            weights.len(),
            v.nrows()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::contract(format!("prox scale must be nonnegative, got {t}")));
    }
    let mut out = v.to_owned();
    for (mut row, &w) in out.axis_iter_mut(Axis(0)).zip(weights.as_array()) {
        let thr = t * w;
        if thr > 0.0 {
            row.mapv_inplace(|x| soft_threshold(x, thr));
        }
    }
    Ok(out)
}

/// Group soft-thresholding of every row: prox of `threshold * sum_j ||v^j||_2`.
pub fn row_group_l2_prox(v: ArrayView2<'_, f64>, threshold: f64) -> Array2<f64> {
    let mut out = v.to_owned();
    if threshold <= 0.0 {
        return out;
    }
    for mut row in out.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        let scale = if norm > threshold { 1.0 - threshold / norm } else { 0.0 };
        row.mapv_inplace(|x| x * scale);
    }
    out
}

/// Euclidean projection onto `{x : ||x||_1 <= radius}` by sorting magnitudes
/// and locating the soft threshold.
pub fn project_l1_ball(v: ArrayView1<'_, f64>, radius: f64) -> Array1<f64> {
    if radius <= 0.0 {
        return Array1::zeros(v.len());
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_owned();
    }
    let tau = l1_ball_threshold(v, radius);
    v.mapv(|x| soft_threshold(x, tau))
}

/// Threshold `tau` with `sum_k max(0, |v_k| - tau) = radius`; requires
/// `||v||_1 > radius > 0`.
fn l1_ball_threshold(v: ArrayView1<'_, f64>, radius: f64) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if u > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

/// Prox of `threshold * ||x||_inf` via the Moreau decomposition
/// `v - P_{l1 ball of radius threshold}(v)`.
pub fn linf_prox_row(v: ArrayView1<'_, f64>, threshold: f64) -> Array1<f64> {
    if threshold <= 0.0 {
        return v.to_owned();
    }
    &v - &project_l1_ball(v, threshold)
}

/// Prox of the dirty-model penalty `lambda_s ||S||_{1,1} + lambda_b sum_j ||b^j||_inf`,
/// which is separable in `S` and `B`.
pub fn dirty_prox(
    s: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    lambda_s: f64,
    lambda_b: f64,
    t: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if s.dim() != b.dim() {
        return Err(Error::contract(format!(
            "S is {:?} but B is {:?}",
            s.dim(),
            b.dim()
        )));
    }
    if !(lambda_s >= 0.0 && lambda_b >= 0.0 && t >= 0.0) {
        return Err(Error::contract("dirty prox parameters must be nonnegative"));
    }
    Ok((soft_threshold_matrix(s, t * lambda_s), row_linf_prox(b, t * lambda_b)))
}

pub(crate) fn soft_threshold_matrix(s: ArrayView2<'_, f64>, thr: f64) -> Array2<f64> {
    let mut out = s.to_owned();
    if thr > 0.0 {
        out.mapv_inplace(|x| soft_threshold(x, thr));
    }
    out
}

pub(crate) fn row_linf_prox(b: ArrayView2<'_, f64>, thr: f64) -> Array2<f64> {
    let mut out = b.to_owned();
    if thr > 0.0 {
        Zip::from(out.rows_mut())
            .and(b.rows())
            .for_each(|mut o, row| o.assign(&linf_prox_row(row, thr)));
    }
    out
}
