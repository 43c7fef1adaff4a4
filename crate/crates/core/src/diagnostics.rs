//! Theory-side quantities: sparse eigenvalues, the residual correlation at
//! the true weights, and the stagewise parameter-error bound with its
//! sufficient conditions.
//!
//! Sparse eigenvalues are computed by brute force over supports. By Cauchy
//! interlacing the extreme eigenvalues over supports of size at most `k` are
//! attained at size exactly `k`, so only `|S| = k` is enumerated.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::model::{TaskDataset, WeightMatrix};
use crate::par::{self, Execution};

/// Default budget of support sets per task.
pub const DEFAULT_SUPPORT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEigenOptions {
    pub support_cap: u128,
    pub execution: Execution,
}

impl Default for SparseEigenOptions {
    fn default() -> Self {
        SparseEigenOptions {
            support_cap: DEFAULT_SUPPORT_CAP,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEigenResult {
    pub k: usize,
    /// `rho^+_i(k)`: largest eigenvalue of `X_S^T X_S / n_i` over `|S| <= k`.
    pub rho_plus: Vec<f64>,
    /// `rho^-_i(k)`: smallest eigenvalue over `|S| <= k`, clamped at 0.
    pub rho_minus: Vec<f64>,
    pub rho_plus_max: f64,
    pub rho_minus_min: f64,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Sparse eigenvalues of every task with the default support cap.
pub fn sparse_eigenvalues(data: &TaskDataset, k: usize) -> Result<SparseEigenResult> {
    sparse_eigenvalues_with(data, k, &SparseEigenOptions::default())
}

pub fn sparse_eigenvalues_with(
    data: &TaskDataset,
    k: usize,
    options: &SparseEigenOptions,
) -> Result<SparseEigenResult> {
    let d = data.dim();
    if k == 0 || k > d {
        return Err(Error::contract(format!("sparsity level must be in 1..={d}, got {k}")));
    }
    let count = binomial(d, k);
    if count > options.support_cap {
        return Err(Error::CapExceeded {
            count,
            cap: options.support_cap,
        });
    }

    let grams: Vec<Array2<f64>> = data
        .tasks()
        .iter()
        .map(|t| {
            let x = t.design();
            x.t().dot(&x) / t.samples() as f64
        })
        .collect();

    // Work units: (task, first index of the support).
    let units: Vec<(usize, usize)> = (0..data.task_count())
        .flat_map(|i| (0..=d - k).map(move |first| (i, first)))
        .collect();
    let partial = par::map(options.execution, &units, |&(task, first)| {
        extremes_with_first(&grams[task], k, first)
    });

    let m = data.task_count();
    let mut rho_plus = vec![f64::NEG_INFINITY; m];
    let mut rho_minus = vec![f64::INFINITY; m];
    for (&(task, _), (hi, lo)) in units.iter().zip(partial) {
        rho_plus[task] = rho_plus[task].max(hi);
        rho_minus[task] = rho_minus[task].min(lo);
    }
    for v in &mut rho_minus {
        *v = v.max(0.0);
    }
    Ok(SparseEigenResult {
        k,
        rho_plus_max: rho_plus.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        rho_minus_min: rho_minus.iter().cloned().fold(f64::INFINITY, f64::min),
        rho_plus,
        rho_minus,
    })
}

/// Extreme eigenvalues of principal `k x k` submatrices of `gram` whose
/// smallest index is `first`.
fn extremes_with_first(gram: &Array2<f64>, k: usize, first: usize) -> (f64, f64) {
    let d = gram.nrows();
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut support: Vec<usize> = (first..first + k).collect();
    loop {
        let (a, b) = support_extremes(gram, &support);
        hi = hi.max(a);
        lo = lo.min(b);
        // Advance the tail (positions 1..k) to the next combination.
        let mut pos = k;
        loop {
            if pos <= 1 {
                return (hi, lo);
            }
            pos -= 1;
            if support[pos] < d - k + pos {
                break;
            }
        }
        support[pos] += 1;
        for p in pos + 1..k {
            support[p] = support[p - 1] + 1;
        }
    }
}

fn support_extremes(gram: &Array2<f64>, support: &[usize]) -> (f64, f64) {
    match support.len() {
        1 => {
            let v = gram[[support[0], support[0]]];
            (v, v)
        }
        2 => {
            let (a, b, c) = (
                gram[[support[0], support[0]]],
                gram[[support[1], support[1]]],
                gram[[support[0], support[1]]],
            );
            let mid = 0.5 * (a + b);
            let rad = (0.25 * (a - b) * (a - b) + c * c).sqrt();
            (mid + rad, mid - rad)
        }
        k => {
            let sub = DMatrix::from_fn(k, k, |r, c| gram[[support[r], support[c]]]);
            let eig = SymmetricEigen::new(sub).eigenvalues;
            (eig.max(), eig.min())
        }
    }
}

/// Columns `(1/n_i) X_i^T (X_i w_i - y_i)` at the true weights.
pub fn residual_correlation(data: &TaskDataset, truth: &WeightMatrix) -> Result<Array2<f64>> {
    data.check_shape(truth.view())?;
    let mut out = Array2::zeros((data.dim(), data.task_count()));
    for ((t, wi), mut col) in data
        .tasks()
        .iter()
        .zip(truth.view().axis_iter(Axis(1)))
        .zip(out.axis_iter_mut(Axis(1)))
    {
        let x = t.design();
        let r = x.dot(&wi) - t.response();
        col.assign(&(x.t().dot(&r) / t.samples() as f64));
    }
    Ok(out)
}

/// `sigma * sqrt(2 rho^+_max(1) ln(2 d m / eta) / n)`: high-probability bound on
/// the largest entry of the residual correlation.
pub fn residual_correlation_bound(sigma: f64, rho_plus_max_1: f64, d: usize, m: usize, n: usize, eta: f64) -> f64 {
    sigma * (2.0 * rho_plus_max_1 * (2.0 * (d * m) as f64 / eta).ln() / n as f64).sqrt()
}

/// Smallest admissible `lambda`: twelve times [`residual_correlation_bound`].
pub fn lambda_lower_bound(sigma: f64, rho_plus_max_1: f64, d: usize, m: usize, n: usize, eta: f64) -> f64 {
    12.0 * residual_correlation_bound(sigma, rho_plus_max_1, d, m, n, eta)
}

/// Inputs of [`theorem3_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub sigma: f64,
    pub eta: f64,
    /// Sparsity slack `s >= r_bar`; `None` uses `s = r_bar`.
    pub s: Option<usize>,
    pub lambda: f64,
    pub theta: f64,
    pub stages: usize,
    pub eigen: SparseEigenOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundConditions {
    /// Every nonzero row of the truth has `||w^j||_1 >= 2 theta`.
    pub row_strength: bool,
    /// `rho^+_i(s) / rho^-_i(2 r_bar + 2 s) <= 1 + s / (2 r_bar)` for every task.
    pub sparse_eigenvalue: bool,
    pub lambda: bool,
    pub theta: bool,
}

impl BoundConditions {
    pub fn all(&self) -> bool {
        self.row_strength && self.sparse_eigenvalue && self.lambda && self.theta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lambda_min: f64,
    pub theta_min: f64,
    pub conditions: BoundConditions,
    /// Bound on `||W^(l) - W_true||_{2,1}` for `l = 1..=stages`.
    pub bound_per_stage: Vec<f64>,
    /// Shrinking part of each stage bound.
    pub stage_terms: Vec<f64>,
    /// Stage-independent noise part of the bound.
    pub noise_term: f64,
    pub r_bar: usize,
    pub s: usize,
    pub n: usize,
    pub eta: f64,
    pub sigma: f64,
    pub u: f64,
    pub rho_plus_max_1: f64,
    pub rho_plus_max_rbar: f64,
    pub rho_minus_min_2r_s: f64,
}

/// Evaluates the sufficient conditions and the per-stage error bound for the
/// multi-stage estimator on `data` with ground truth `truth`.
///
/// Tasks with different sample sizes use `n = min_i n_i` in the bound.
pub fn theorem3_report(data: &TaskDataset, truth: &WeightMatrix, params: &BoundParams) -> Result<BoundReport> {
    data.check_shape(truth.view())?;
    if !(params.sigma >= 0.0) || !(params.eta > 0.0 && params.eta < 1.0) {
        return Err(Error::contract("sigma must be >= 0 and eta in (0, 1)"));
    }
    if !(params.lambda > 0.0 && params.theta > 0.0) || params.stages == 0 {
        return Err(Error::contract("lambda, theta and stages must be positive"));
    }
    let d = data.dim();
    let m = data.task_count();
    let n = data.sample_counts().into_iter().min().unwrap_or(1);
    let r_bar = truth.nonzero_rows();
    if r_bar == 0 {
        return Err(Error::contract("the true weight matrix has no nonzero rows"));
    }
    let s = params.s.unwrap_or(r_bar);
    if s < r_bar {
        return Err(Error::contract(format!("s = {s} must be at least r_bar = {r_bar}")));
    }
    let level = |k: usize| k.min(d);
    let eig = |k: usize| sparse_eigenvalues_with(data, level(k), &params.eigen);

    let rho1 = eig(1)?;
    let rho_rbar = eig(r_bar)?;
    let rho_s = eig(s)?;
    let rho_2r2s = eig(2 * r_bar + 2 * s)?;
    let rho_2rs = eig(2 * r_bar + s)?;

    let lambda_min = lambda_lower_bound(params.sigma, rho1.rho_plus_max, d, m, n, params.eta);
    let rho_minus = rho_2rs.rho_minus_min;
    let theta_min = 11.0 * m as f64 * params.lambda / rho_minus;

    let row_l1 = truth.row_l1_norms();
    let row_strength = row_l1.iter().filter(|&&v| v > 0.0).all(|&v| v >= 2.0 * params.theta);
    let ratio_cap = 1.0 + s as f64 / (2.0 * r_bar as f64);
    let sparse_eigenvalue = rho_s
        .rho_plus
        .iter()
        .zip(&rho_2r2s.rho_minus)
        .all(|(&hi, &lo)| lo > 0.0 && hi / lo <= ratio_cap);

    let log_term = 7.4 * r_bar as f64 + 2.7 * (2.0 / params.eta).ln();
    let u = m as f64 * params.sigma * params.sigma * rho_rbar.rho_plus_max * log_term / n as f64;
    let noise_term =
        39.5 * m as f64 * params.sigma * (rho_rbar.rho_plus_max * log_term / n as f64).sqrt() / rho_minus;
    let lead = 9.1 * m as f64 * params.lambda * (r_bar as f64).sqrt() / rho_minus;
    let shrink = 0.8_f64.sqrt();
    let stage_terms: Vec<f64> = std::iter::successors(Some(lead * shrink), |t| Some(t * shrink))
        .take(params.stages)
        .collect();
    let bound_per_stage = stage_terms.iter().map(|t| t + noise_term).collect();

    Ok(BoundReport {
        lambda_min,
        theta_min,
        conditions: BoundConditions {
            row_strength,
            sparse_eigenvalue,
            lambda: params.lambda >= lambda_min,
            theta: params.theta >= theta_min,
        },
        bound_per_stage,
        stage_terms,
        noise_term,
        r_bar,
        s,
        n,
        eta: params.eta,
        sigma: params.sigma,
        u,
        rho_plus_max_1: rho1.rho_plus_max,
        rho_plus_max_rbar: rho_rbar.rho_plus_max,
        rho_minus_min_2r_s: rho_minus,
    })
}
