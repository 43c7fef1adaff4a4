//! Problem data, the quadratic multi-task loss and objective evaluation.
//!
//! The loss over `m` tasks is
//!
//! ```text
//! l(W) = sum_i 1/(m * n_i) * || X_i w_i - y_i ||^2
//! ```
//!
//! where `w_i` is the i-th column of the `d x m` weight matrix `W`. Rows of
//! `W` are features, columns are tasks.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seed of the start vector used by [`lipschitz_constant`].
pub const POWER_ITERATION_SEED: u64 = 0x005e_ed0f_5a11;
const POWER_ITERATION_MAX: usize = 10_000;
const POWER_ITERATION_RTOL: f64 = 1e-6;

/// One regression task: an `n_i x d` design and a length-`n_i` response.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    design: Array2<f64>,
    response: Array1<f64>,
}

impl Task {
    pub fn design(&self) -> ArrayView2<'_, f64> {
        self.design.view()
    }

    pub fn response(&self) -> ArrayView1<'_, f64> {
        self.response.view()
    }

    pub fn samples(&self) -> usize {
        self.response.len()
    }
}

/// Training data for `m` linear regression tasks sharing `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    tasks: Vec<Task>,
    dim: usize,
}

impl TaskDataset {
    /// Builds a dataset, validating shapes, finiteness and the absence of
    /// all-zero design columns.
    pub fn new(tasks: Vec<(Array2<f64>, Array1<f64>)>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::contract("a dataset needs at least one task"));
        }
        let dim = tasks[0].0.ncols();
        if dim == 0 {
            return Err(Error::contract("feature dimension must be positive"));
        }
        let mut out = Vec::with_capacity(tasks.len());
        for (i, (design, response)) in tasks.into_iter().enumerate() {
            if design.ncols() != dim {
                return Err(Error::contract(format!(
                    "task {i} has {} columns, expected {dim}",
                    design.ncols()
                )));
            }
            if design.nrows() == 0 {
                return Err(Error::contract(format!("task {i} has no samples")));
            }
            if design.nrows() != response.len() {
                return Err(Error::contract(format!(
                    "task {i}: design has {} rows but response has {} entries",
                    design.nrows(),
                    response.len()
                )));
            }
            if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
                return Err(Error::contract(format!("task {i} contains non-finite values")));
            }
            if let Some(j) = design
                .axis_iter(Axis(1))
                .position(|col| col.iter().all(|&v| v == 0.0))
            {
                return Err(Error::contract(format!(
                    "task {i}: design column {j} is identically zero"
                )));
            }
            out.push(Task { design, response });
        }
        Ok(TaskDataset { tasks: out, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &Task {
        &self.tasks[i]
    }

    pub fn sample_counts(&self) -> Vec<usize> {
        self.tasks.iter().map(Task::samples).collect()
    }

    /// New dataset made of the given sample indices of every task.
    pub fn select(&self, rows: &[Vec<usize>]) -> Result<TaskDataset> {
        if rows.len() != self.task_count() {
            return Err(Error::contract(format!(
                "row selection covers {} tasks, dataset has {}",
                rows.len(),
                self.task_count()
            )));
        }
        let tasks = self
            .tasks
            .iter()
            .zip(rows)
            .map(|(t, idx)| {
                (
                    t.design.select(Axis(0), idx),
                    t.response.select(Axis(0), idx),
                )
            })
            .collect();
        TaskDataset::new(tasks)
    }

    /// Predictions `X_i w_i` for every task.
    pub fn predict(&self, w: &WeightMatrix) -> Result<Vec<Array1<f64>>> {
        self.check_shape(w.view())?;
        Ok(self
            .tasks
            .iter()
            .zip(w.view().axis_iter(Axis(1)))
            .map(|(t, wi)| t.design.dot(&wi))
            .collect())
    }

    pub(crate) fn check_shape(&self, w: ArrayView2<'_, f64>) -> Result<()> {
        if w.dim() != (self.dim, self.task_count()) {
            return Err(Error::contract(format!(
                "weight matrix is {}x{}, data expects {}x{}",
                w.nrows(),
                w.ncols(),
                self.dim,
                self.task_count()
            )));
        }
        Ok(())
    }

    fn task_scale(&self, i: usize) -> f64 {
        1.0 / (self.task_count() * self.tasks[i].samples()) as f64
    }

    /// Per-task residuals `X_i w_i - y_i`; shapes are assumed valid.
    fn residuals(&self, w: ArrayView2<'_, f64>) -> Vec<Array1<f64>> {
        self.tasks
            .iter()
            .zip(w.axis_iter(Axis(1)))
            .map(|(t, wi)| t.design.dot(&wi) - &t.response)
            .collect()
    }

    pub(crate) fn loss_unchecked(&self, w: ArrayView2<'_, f64>) -> f64 {
        self.residuals(w)
            .iter()
            .enumerate()
            .map(|(i, r)| self.task_scale(i) * r.dot(r))
            .sum()
    }

    pub(crate) fn gradient_unchecked(&self, w: ArrayView2<'_, f64>) -> Array2<f64> {
        self.loss_and_gradient_unchecked(w).1
    }

    pub(crate) fn loss_and_gradient_unchecked(&self, w: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        let mut grad = Array2::zeros((self.dim, self.task_count()));
        let mut loss = 0.0;
        for (i, (r, mut g)) in self
            .residuals(w)
            .into_iter()
            .zip(grad.axis_iter_mut(Axis(1)))
            .enumerate()
        {
            let scale = self.task_scale(i);
            loss += scale * r.dot(&r);
            g.assign(&(self.tasks[i].design.t().dot(&r) * (2.0 * scale)));
        }
        (loss, grad)
    }

    /// Single-task view of task `i` as its own one-task problem with the
    /// original `1/(m n_i)` scaling preserved by `task_weight`.
    pub(crate) fn task_loss_and_gradient(
        &self,
        i: usize,
        wi: ArrayView1<'_, f64>,
    ) -> (f64, Array1<f64>) {
        let t = &self.tasks[i];
        let r = t.design.dot(&wi) - &t.response;
        let scale = self.task_scale(i);
        (scale * r.dot(&r), t.design.t().dot(&r) * (2.0 * scale))
    }

    pub(crate) fn task_lipschitz(&self, i: usize) -> Result<f64> {
        let s = largest_singular_value(self.tasks[i].design.view())?;
        Ok(2.0 * s * s * self.task_scale(i))
    }
}

/// `d x m` coefficient matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("weight matrix contains non-finite entries"));
        }
        Ok(WeightMatrix(entries))
    }

    pub fn zeros(dim: usize, tasks: usize) -> Self {
        WeightMatrix(Array2::zeros((dim, tasks)))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    /// `||w^j||_1` for every feature row.
    pub fn row_l1_norms(&self) -> Array1<f64> {
        row_l1_norms(self.0.view())
    }

    /// Number of rows with at least one nonzero entry.
    pub fn nonzero_rows(&self) -> usize {
        self.0
            .axis_iter(Axis(0))
            .filter(|row| row.iter().any(|&v| v != 0.0))
            .count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

pub(crate) fn row_l1_norms(w: ArrayView2<'_, f64>) -> Array1<f64> {
    w.map_axis(Axis(1), |row| row.iter().map(|v| v.abs()).sum())
}

/// Entrywise-sparse plus row-block decomposition `W = S + B` used by the
/// dirty model.
#[derive(Debug, Clone, PartialEq)]
pub struct DirtySplit {
    pub sparse: Array2<f64>,
    pub block: Array2<f64>,
}

impl DirtySplit {
    pub fn combined(&self) -> Array2<f64> {
        &self.sparse + &self.block
    }
}

/// Penalty attached to the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizerSpec {
    /// `lambda * sum_j min(||w^j||_1, theta)`.
    CappedL1L1 { lambda: f64, theta: f64 },
    /// `lambda * sum_{j,i} |w_ji|`.
    L1 { lambda: f64 },
    /// `lambda * sum_j ||w^j||_2`.
    L12 { lambda: f64 },
    /// `lambda_s * sum |s_ji| + lambda_b * sum_j max_i |b_ji|` on a split `W = S + B`.
    Dirty { lambda_s: f64, lambda_b: f64 },
}

impl RegularizerSpec {
    pub fn capped(lambda: f64, theta: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        positive("theta", theta)?;
        Ok(RegularizerSpec::CappedL1L1 { lambda, theta })
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(RegularizerSpec::L1 { lambda })
    }

    pub fn l12(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(RegularizerSpec::L12 { lambda })
    }

    pub fn dirty(lambda_s: f64, lambda_b: f64) -> Result<Self> {
        positive("lambda_s", lambda_s)?;
        positive("lambda_b", lambda_b)?;
        Ok(RegularizerSpec::Dirty { lambda_s, lambda_b })
    }
}

pub(crate) fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("{name} must be positive and finite, got {value}")))
    }
}

/// Per-feature weights of the weighted-Lasso subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct RegWeights(Array1<f64>);

impl RegWeights {
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::contract("feature weights must be finite and nonnegative"));
        }
        Ok(RegWeights(weights))
    }

    pub fn uniform(dim: usize, lambda: f64) -> Self {
        RegWeights(Array1::from_elem(dim, lambda))
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }
}

/// Record of one stage of a (multi-stage) fit.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    /// 1-based stage index.
    pub stage: usize,
    /// Objective of the fitted model's own regularizer at the stage solution.
    pub objective: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub kkt_residual: f64,
    /// `||W - W_true||_{2,1}` when ground truth was supplied.
    pub param_error_l21: Option<f64>,
}

/// Quadratic multi-task loss.
pub fn loss_value(data: &TaskDataset, w: &WeightMatrix) -> Result<f64> {
    data.check_shape(w.view())?;
    Ok(data.loss_unchecked(w.view()))
}

/// Gradient of [`loss_value`]; column `i` is `2/(m n_i) X_i^T (X_i w_i - y_i)`.
pub fn loss_gradient(data: &TaskDataset, w: &WeightMatrix) -> Result<Array2<f64>> {
    data.check_shape(w.view())?;
    Ok(data.gradient_unchecked(w.view()))
}

/// Penalty of `reg` at a dense `W`. Errors for the dirty model, whose penalty
/// depends on the split.
pub fn penalty_value(w: ArrayView2<'_, f64>, reg: &RegularizerSpec) -> Result<f64> {
    Ok(match *reg {
        RegularizerSpec::CappedL1L1 { lambda, theta } => {
            lambda * row_l1_norms(w).iter().map(|&n| n.min(theta)).sum::<f64>()
        }
        RegularizerSpec::L1 { lambda } => lambda * w.iter().map(|v| v.abs()).sum::<f64>(),
        RegularizerSpec::L12 { lambda } => lambda * row_l2_sum(w),
        RegularizerSpec::Dirty { .. } => {
            return Err(Error::contract(
                "the dirty-model penalty needs an explicit (S, B) split",
            ))
        }
    })
}

pub(crate) fn row_l2_sum(w: ArrayView2<'_, f64>) -> f64 {
    w.axis_iter(Axis(0))
        .map(|row| row.dot(&row).sqrt())
        .sum()
}

pub(crate) fn dirty_penalty(s: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, lambda_s: f64, lambda_b: f64) -> f64 {
    let sparse: f64 = s.iter().map(|v| v.abs()).sum();
    let block: f64 = b
        .axis_iter(Axis(0))
        .map(|row| row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
        .sum();
    lambda_s * sparse + lambda_b * block
}

/// Loss plus penalty at `W`.
pub fn objective_value(data: &TaskDataset, w: &WeightMatrix, reg: &RegularizerSpec) -> Result<f64> {
    let loss = loss_value(data, w)?;
    Ok(loss + penalty_value(w.view(), reg)?)
}

/// Loss plus penalty for a model given as `W = S + B`. For the non-dirty
/// kinds the penalty is evaluated at `S + B`.
pub fn objective_value_split(
    data: &TaskDataset,
    split: &DirtySplit,
    reg: &RegularizerSpec,
) -> Result<f64> {
    if split.sparse.dim() != split.block.dim() {
        return Err(Error::contract("S and B must have the same shape"));
    }
    let w = WeightMatrix::new(split.combined())?;
    let loss = loss_value(data, &w)?;
    match *reg {
        RegularizerSpec::Dirty { lambda_s, lambda_b } => Ok(loss
            + dirty_penalty(split.sparse.view(), split.block.view(), lambda_s, lambda_b)),
        _ => Ok(loss + penalty_value(w.view(), reg)?),
    }
}

/// Lipschitz constant of [`loss_gradient`]: `max_i 2 sigma_max(X_i)^2 / (m n_i)`.
///
/// The loss is block-separable over task columns, so the per-task maximum
/// bounds the full Hessian.
pub fn lipschitz_constant(data: &TaskDataset) -> Result<f64> {
    (0..data.task_count())
        .map(|i| data.task_lipschitz(i))
        .try_fold(0.0_f64, |acc, l| Ok(acc.max(l?)))
}

/// Largest singular value by power iteration on `X^T X`.
pub fn largest_singular_value(x: ArrayView2<'_, f64>) -> Result<f64> {
    let d = x.ncols();
    let mut rng = ChaCha20Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v: Array1<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0_f64;
    for _ in 0..POWER_ITERATION_MAX {
        let xv = x.dot(&v);
        // Rayleigh quotient of X^T X at the unit vector v.
        let rayleigh = xv.dot(&xv);
        let mut next = x.t().dot(&xv);
        let next_norm = next.dot(&next).sqrt();
        if !next_norm.is_finite() {
            return Err(Error::numerical("power iteration produced a non-finite iterate"));
        }
        if next_norm == 0.0 {
            return Ok(0.0);
        }
        next /= next_norm;
        if (rayleigh - estimate).abs() <= POWER_ITERATION_RTOL * rayleigh {
            // one more Rayleigh quotient at the refined vector is never smaller
            let xn = x.dot(&next);
            return Ok(xn.dot(&xn).max(rayleigh).sqrt());
        }
        estimate = rayleigh;
        v = next;
    }
    Err(Error::numerical(format!(
        "power iteration did not converge in {POWER_ITERATION_MAX} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_by_one() -> TaskDataset {
        TaskDataset::new(vec![(array![[1.0]], array![1.0])]).unwrap()
    }

    fn two_identity_tasks() -> TaskDataset {
        let eye = Array2::eye(2);
        TaskDataset::new(vec![
            (eye.clone(), array![1.0, 1.0]),
            (eye, array![1.0, 1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn loss_examples() {
        let data = one_by_one();
        let w0 = WeightMatrix::new(array![[0.0]]).unwrap();
        let w1 = WeightMatrix::new(array![[1.0]]).unwrap();
        assert_eq!(loss_value(&data, &w0).unwrap(), 1.0);
        assert_eq!(loss_value(&data, &w1).unwrap(), 0.0);
        let data = two_identity_tasks();
        assert_eq!(loss_value(&data, &WeightMatrix::zeros(2, 2)).unwrap(), 1.0);
    }

    #[test]
    fn gradient_examples() {
        let data = one_by_one();
        let g = loss_gradient(&data, &WeightMatrix::zeros(1, 1)).unwrap();
        assert_eq!(g, array![[-2.0]]);
        let exact = WeightMatrix::new(array![[1.0]]).unwrap();
        assert_eq!(loss_gradient(&data, &exact).unwrap(), array![[0.0]]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let data = two_identity_tasks();
        let w = WeightMatrix::zeros(3, 2);
        assert!(matches!(loss_value(&data, &w), Err(Error::Contract(_))));
        assert!(matches!(loss_gradient(&data, &w), Err(Error::Contract(_))));
    }

    #[test]
    fn construction_rejects_bad_data() {
        let zero_col = TaskDataset::new(vec![(array![[1.0, 0.0], [2.0, 0.0]], array![1.0, 2.0])]);
        assert!(matches!(zero_col, Err(Error::Contract(_))));
        let ragged = TaskDataset::new(vec![
            (array![[1.0, 2.0]], array![1.0]),
            (array![[1.0]], array![1.0]),
        ]);
        assert!(ragged.is_err());
        let empty = TaskDataset::new(vec![(Array2::zeros((0, 2)), Array1::zeros(0))]);
        assert!(empty.is_err());
        assert!(TaskDataset::new(vec![]).is_err());
        assert!(WeightMatrix::new(array![[f64::NAN]]).is_err());
    }

    #[test]
    fn objective_examples() {
        // Zero-loss W with row l1 norms (0.5, 3).
        let data = TaskDataset::new(vec![(Array2::eye(2), array![0.5, 3.0])]).unwrap();
        let w = WeightMatrix::new(array![[0.5], [3.0]]).unwrap();
        let reg = RegularizerSpec::capped(2.0, 1.0).unwrap();
        assert_eq!(objective_value(&data, &w, &reg).unwrap(), 3.0);

        let data = TaskDataset::new(vec![
            (Array2::eye(2), array![3.0, 0.0]),
            (Array2::eye(2), array![4.0, 0.0]),
        ])
        .unwrap();
        let w = WeightMatrix::new(array![[3.0, 4.0], [0.0, 0.0]]).unwrap();
        let reg = RegularizerSpec::l12(1.0).unwrap();
        assert_eq!(objective_value(&data, &w, &reg).unwrap(), 5.0);

        let zero = WeightMatrix::zeros(2, 2);
        let loss0 = loss_value(&data, &zero).unwrap();
        for reg in [
            RegularizerSpec::capped(1.0, 1.0).unwrap(),
            RegularizerSpec::l1(2.0).unwrap(),
            RegularizerSpec::l12(3.0).unwrap(),
        ] {
            assert_eq!(objective_value(&data, &zero, &reg).unwrap(), loss0);
        }
        let dirty = RegularizerSpec::dirty(1.0, 1.0).unwrap();
        assert!(matches!(objective_value(&data, &zero, &dirty), Err(Error::Contract(_))));
        let split = DirtySplit {
            sparse: array![[1.0, 0.0], [0.0, 0.0]],
            block: array![[2.0, 4.0], [0.0, 0.0]],
        };
        // loss at S+B = W exact fit is 0; penalty 1*1 + 1*4.
        assert_eq!(objective_value_split(&data, &split, &dirty).unwrap(), 5.0);
    }

    #[test]
    fn regularizer_parameters_must_be_positive() {
        assert!(RegularizerSpec::capped(0.0, 1.0).is_err());
        assert!(RegularizerSpec::capped(1.0, -1.0).is_err());
        assert!(RegularizerSpec::l1(f64::NAN).is_err());
        assert!(RegularizerSpec::dirty(1.0, 0.0).is_err());
        assert!(RegWeights::new(array![1.0, -0.5]).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let single = TaskDataset::new(vec![(Array2::eye(2), array![1.0, 1.0])]).unwrap();
        assert!((lipschitz_constant(&single).unwrap() - 1.0).abs() < 1e-12);
        assert!((lipschitz_constant(&two_identity_tasks()).unwrap() - 0.5).abs() < 1e-12);
    }
}
