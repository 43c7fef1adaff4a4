//! Matrix norms and prediction / estimation error metrics.

use ndarray::{Array1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::model::WeightMatrix;

/// Which axis the outer sum of an `l_{p,q}` norm runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterAxis {
    Rows,
    Columns,
}

fn vector_norm<'a>(values: impl Iterator<Item = &'a f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0_f64, |acc, v| acc.max(v.abs()))
    } else if q == 1.0 {
        values.map(|v| v.abs()).sum()
    } else if q == 2.0 {
        values.map(|v| v * v).sum::<f64>().sqrt()
    } else {
        values.map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// `(sum_outer (sum_inner |a|^q)^(p/q))^(1/p)`; `f64::INFINITY` selects the max.
pub fn lpq_norm(m: ArrayView2<'_, f64>, p: f64, q: f64, outer: OuterAxis) -> Result<f64> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::contract(format!("l_(p,q) norm needs p, q >= 1, got p={p}, q={q}")));
    }
    let axis = match outer {
        OuterAxis::Rows => Axis(0),
        OuterAxis::Columns => Axis(1),
    };
    let inner: Vec<f64> = m.axis_iter(axis).map(|lane| vector_norm(lane.iter(), q)).collect();
    Ok(vector_norm(inner.iter(), p))
}

/// Sum over task columns of the Euclidean norm of the coefficient error.
pub fn param_error_l21(estimate: &WeightMatrix, truth: &WeightMatrix) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::contract(format!(
            "estimate is {:?} but truth is {:?}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let diff = estimate.as_array() - truth.as_array();
    lpq_norm(diff.view(), 1.0, 2.0, OuterAxis::Columns)
}

fn check_aligned(predictions: &[Array1<f64>], actuals: &[Array1<f64>]) -> Result<()> {
    if predictions.len() != actuals.len() || predictions.is_empty() {
        return Err(Error::contract("predictions and actuals must cover the same nonempty task list"));
    }
    for (i, (p, a)) in predictions.iter().zip(actuals).enumerate() {
        if p.len() != a.len() || a.is_empty() {
            return Err(Error::contract(format!(
                "task {i}: {} predictions for {} targets",
                p.len(),
                a.len()
            )));
        }
    }
    Ok(())
}

fn mse(p: &Array1<f64>, a: &Array1<f64>) -> f64 {
    let d = p - a;
    d.dot(&d) / a.len() as f64
}

/// Sample-size weighted average of per-task MSE normalized by `normalizer`.
fn weighted_normalized_mse(
    predictions: &[Array1<f64>],
    actuals: &[Array1<f64>],
    normalizer: impl Fn(&Array1<f64>) -> f64,
    what: &str,
) -> Result<f64> {
    check_aligned(predictions, actuals)?;
    let mut num = 0.0;
    let mut total = 0usize;
    for (i, (p, a)) in predictions.iter().zip(actuals).enumerate() {
        let norm = normalizer(a);
        if !(norm > 0.0) {
            return Err(Error::numerical(format!("task {i}: test targets have zero {what}")));
        }
        num += a.len() as f64 * mse(p, a) / norm;
        total += a.len();
    }
    Ok(num / total as f64)
}

/// Normalized MSE: per-task MSE over the population variance of the test
/// targets, averaged with weights `n_i`.
pub fn nmse(predictions: &[Array1<f64>], actuals: &[Array1<f64>]) -> Result<f64> {
    weighted_normalized_mse(
        predictions,
        actuals,
        |a| {
            let mean = a.mean().unwrap_or(0.0);
            a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / a.len() as f64
        },
        "variance",
    )
}

/// Averaged MSE: per-task MSE over the mean square of the test targets,
/// averaged with weights `n_i`.
pub fn amse(predictions: &[Array1<f64>], actuals: &[Array1<f64>]) -> Result<f64> {
    weighted_normalized_mse(predictions, actuals, |a| a.dot(a) / a.len() as f64, "mean square")
}
