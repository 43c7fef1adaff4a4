//! The multi-stage capped-l1,l1 solver and the convex baselines.
//!
//! Every stage of the multi-stage method is a weighted Lasso
//!
//! ```text
//! min_W  l(W) + sum_j lambda_j ||w^j||_1
//! ```
//!
//! whose weights come from the previous stage: `lambda_j = lambda` when the
//! row's l1 norm is below `theta` and 0 otherwise. With a single stage the
//! method is the plain multi-task Lasso.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::fista::{fista_solve, CompositeProblem, SolveResult, SolverConfig};
use crate::metrics::param_error_l21;
use crate::model::{
    dirty_penalty, lipschitz_constant, objective_value, positive, row_l1_norms, row_l2_sum,
    DirtySplit, RegWeights, RegularizerSpec, StageTrace, TaskDataset, WeightMatrix,
};
use crate::par::{self, Execution};
use crate::prox::{row_group_l2_prox, row_linf_prox, soft_threshold_matrix, weighted_l1_prox};

/// How weighted-Lasso subproblems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerMode {
    /// One FISTA run over the whole `d x m` matrix.
    #[default]
    Joint,
    /// One FISTA run per task column; the subproblem separates over tasks.
    PerTask(Execution),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsmtflConfig {
    pub lambda: f64,
    pub theta: f64,
    pub max_stages: usize,
    pub inner: SolverConfig,
    /// Stop once the capped objective changes by less than this between stages.
    pub stage_tolerance: f64,
    pub inner_mode: InnerMode,
}

impl MsmtflConfig {
    pub fn new(lambda: f64, theta: f64) -> Self {
        MsmtflConfig {
            lambda,
            theta,
            max_stages: 10,
            inner: SolverConfig::default(),
            stage_tolerance: 1e-10,
            inner_mode: InnerMode::Joint,
        }
    }

    pub fn with_stages(mut self, stages: usize) -> Self {
        self.max_stages = stages;
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("theta", self.theta)?;
        if self.max_stages == 0 {
            return Err(Error::contract("at least one stage is required"));
        }
        if !(self.stage_tolerance >= 0.0) {
            return Err(Error::contract("stage tolerance must be nonnegative"));
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub weights: WeightMatrix,
    /// `(S, B)` for the dirty model.
    pub split: Option<DirtySplit>,
    pub stages: Vec<StageTrace>,
    /// Weights used by stage `l` are at index `l - 1`; the last entry is the
    /// reweighting of the final solution.
    pub reg_weights_history: Vec<RegWeights>,
    /// Solution after every stage (one entry for single-stage methods).
    pub stage_solutions: Vec<WeightMatrix>,
}

impl FitResult {
    /// Solution of stage `stage` (1-based). Stages past an early stop repeat
    /// the final solution, which is a fixed point of the stage map.
    pub fn solution_at(&self, stage: usize) -> &WeightMatrix {
        let idx = stage.max(1).min(self.stage_solutions.len()) - 1;
        &self.stage_solutions[idx]
    }
}

/// `lambda * I(||w^j||_1 < theta)` for every row.
pub fn reweight(w: &WeightMatrix, lambda: f64, theta: f64) -> Result<RegWeights> {
    positive("lambda", lambda)?;
    positive("theta", theta)?;
    Ok(reweight_unchecked(w.view(), lambda, theta))
}

fn reweight_unchecked(w: ArrayView2<'_, f64>, lambda: f64, theta: f64) -> RegWeights {
    let weights = row_l1_norms(w).mapv(|n| if n < theta { lambda } else { 0.0 });
    RegWeights::new(weights).expect("indicator weights are nonnegative")
}

/// Largest violation of the weighted-Lasso first-order conditions.
///
/// With `c = -grad l(W)`, active entries must satisfy `c_ji = lambda_j sign(w_ji)`
/// and inactive entries `|c_ji| <= lambda_j`.
pub fn kkt_residual(data: &TaskDataset, w: &WeightMatrix, weights: &RegWeights) -> Result<f64> {
    data.check_shape(w.view())?;
    if weights.len() != data.dim() {
        return Err(Error::contract("feature weights do not match the data dimension"));
    }
    let grad = data.gradient_unchecked(w.view());
    let mut worst = 0.0_f64;
    Zip::indexed(&grad).and(w.view()).for_each(|(j, _), &g, &wji| {
        let c = -g;
        let lam = weights.get(j);
        let violation = if wji != 0.0 {
            (c - lam * wji.signum()).abs()
        } else {
            (c.abs() - lam).max(0.0)
        };
        worst = worst.max(violation);
    });
    Ok(worst)
}

struct WeightedLasso<'a> {
    data: &'a TaskDataset,
    weights: &'a RegWeights,
    lipschitz: f64,
}

impl CompositeProblem for WeightedLasso<'_> {
    fn smooth_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        self.data.loss_unchecked(x)
    }

    fn smooth_value_and_gradient(&self, x: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        self.data.loss_and_gradient_unchecked(x)
    }

    fn penalty_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        weighted_l1(x, self.weights)
    }

    fn prox(&self, v: ArrayView2<'_, f64>, step: f64) -> Array2<f64> {
        weighted_l1_prox(v, self.weights, step).expect("shapes validated before solving")
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// Column `task` of the weighted Lasso as a `d x 1` problem.
struct TaskWeightedLasso<'a> {
    data: &'a TaskDataset,
    task: usize,
    weights: &'a RegWeights,
    lipschitz: f64,
}

impl CompositeProblem for TaskWeightedLasso<'_> {
    fn smooth_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        self.data.task_loss_and_gradient(self.task, x.column(0)).0
    }

    fn smooth_value_and_gradient(&self, x: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        let (f, g) = self.data.task_loss_and_gradient(self.task, x.column(0));
        (f, g.insert_axis(Axis(1)))
    }

    fn penalty_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        weighted_l1(x, self.weights)
    }

    fn prox(&self, v: ArrayView2<'_, f64>, step: f64) -> Array2<f64> {
        weighted_l1_prox(v, self.weights, step).expect("shapes validated before solving")
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

fn weighted_l1(x: ArrayView2<'_, f64>, weights: &RegWeights) -> f64 {
    x.axis_iter(Axis(0))
        .zip(weights.as_array())
        .map(|(row, &lam)| lam * row.iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}

/// Lipschitz constants computed once per fit.
struct StepInfo {
    joint: f64,
    per_task: Vec<f64>,
}

impl StepInfo {
    fn new(data: &TaskDataset, mode: InnerMode) -> Result<Self> {
        Ok(match mode {
            InnerMode::Joint => StepInfo {
                joint: lipschitz_constant(data)?,
                per_task: Vec::new(),
            },
            InnerMode::PerTask(_) => {
                let per_task = (0..data.task_count())
                    .map(|i| data.task_lipschitz(i))
                    .collect::<Result<Vec<_>>>()?;
                StepInfo {
                    joint: per_task.iter().cloned().fold(0.0, f64::max),
                    per_task,
                }
            }
        })
    }
}

/// Outcome of one weighted-Lasso solve.
struct InnerSolve {
    solution: Array2<f64>,
    iterations: usize,
    converged: bool,
}

fn solve_weighted(
    data: &TaskDataset,
    weights: &RegWeights,
    init: ArrayView2<'_, f64>,
    config: &SolverConfig,
    mode: InnerMode,
    steps: &StepInfo,
) -> Result<InnerSolve> {
    match mode {
        InnerMode::Joint => {
            let problem = WeightedLasso {
                data,
                weights,
                lipschitz: steps.joint,
            };
            let res = fista_solve(&problem, init, config)?;
            Ok(InnerSolve {
                solution: res.solution,
                iterations: res.iterations,
                converged: res.converged,
            })
        }
        InnerMode::PerTask(exec) => {
            let tasks: Vec<usize> = (0..data.task_count()).collect();
            let results: Vec<SolveResult> = par::try_map(exec, &tasks, |&i| {
                let problem = TaskWeightedLasso {
                    data,
                    task: i,
                    weights,
                    lipschitz: steps.per_task[i],
                };
                let col = init.slice(s![.., i..i + 1]);
                fista_solve(&problem, col, config)
            })?;
            let mut solution = Array2::zeros((data.dim(), data.task_count()));
            let mut iterations = 0;
            let mut converged = true;
            for (i, r) in results.into_iter().enumerate() {
                solution.column_mut(i).assign(&r.solution.column(0));
                iterations = iterations.max(r.iterations);
                converged &= r.converged;
            }
            Ok(InnerSolve {
                solution,
                iterations,
                converged,
            })
        }
    }
}

/// Minimizer of `l(W) + sum_j lambda_j ||w^j||_1` started from `init`.
pub fn weighted_lasso_fit(
    data: &TaskDataset,
    weights: &RegWeights,
    init: &WeightMatrix,
    config: &SolverConfig,
) -> Result<WeightMatrix> {
    check_weighted_inputs(data, weights, init)?;
    let steps = StepInfo::new(data, InnerMode::Joint)?;
    let res = solve_weighted(data, weights, init.view(), config, InnerMode::Joint, &steps)?;
    WeightMatrix::new(res.solution)
}

fn check_weighted_inputs(data: &TaskDataset, weights: &RegWeights, init: &WeightMatrix) -> Result<()> {
    data.check_shape(init.view())?;
    if weights.len() != data.dim() {
        return Err(Error::contract(format!(
            "{} feature weights for dimension {}",
            weights.len(),
            data.dim()
        )));
    }
    Ok(())
}

/// Multi-stage fit from `W = 0`.
pub fn msmtfl_fit(
    data: &TaskDataset,
    config: &MsmtflConfig,
    ground_truth: Option<&WeightMatrix>,
) -> Result<FitResult> {
    let init = WeightMatrix::zeros(data.dim(), data.task_count());
    msmtfl_fit_from(data, config, &init, ground_truth)
}

/// Multi-stage fit whose first stage starts at `init`; every later stage is
/// warm-started from the previous stage's solution.
pub fn msmtfl_fit_from(
    data: &TaskDataset,
    config: &MsmtflConfig,
    init: &WeightMatrix,
    ground_truth: Option<&WeightMatrix>,
) -> Result<FitResult> {
    config.validate()?;
    data.check_shape(init.view())?;
    if let Some(gt) = ground_truth {
        data.check_shape(gt.view())?;
    }
    let capped = RegularizerSpec::capped(config.lambda, config.theta)?;
    let steps = StepInfo::new(data, config.inner_mode)?;

    let mut weights = RegWeights::uniform(data.dim(), config.lambda);
    let mut history = vec![weights.clone()];
    let mut stages = Vec::with_capacity(config.max_stages);
    let mut solutions = Vec::with_capacity(config.max_stages);
    let mut current = init.clone();
    let mut previous_objective: Option<f64> = None;

    for stage in 1..=config.max_stages {
        let res = solve_weighted(
            data,
            &weights,
            current.view(),
            &config.inner,
            config.inner_mode,
            &steps,
        )?;
        current = WeightMatrix::new(res.solution)?;
        let objective = objective_value(data, &current, &capped)?;
        stages.push(StageTrace {
            stage,
            objective,
            inner_iterations: res.iterations,
            inner_converged: res.converged,
            kkt_residual: kkt_residual(data, &current, &weights)?,
            param_error_l21: ground_truth.map(|gt| param_error_l21(&current, gt)).transpose()?,
        });
        solutions.push(current.clone());
        weights = reweight_unchecked(current.view(), config.lambda, config.theta);
        history.push(weights.clone());

        if let Some(prev) = previous_objective {
            if (prev - objective).abs() < config.stage_tolerance {
                break;
            }
        }
        previous_objective = Some(objective);
    }

    Ok(FitResult {
        weights: current,
        split: None,
        stages,
        reg_weights_history: history,
        stage_solutions: solutions,
    })
}

/// Multi-task Lasso: one stage with uniform weights `lambda`.
pub fn lasso_fit(data: &TaskDataset, lambda: f64, config: &SolverConfig) -> Result<FitResult> {
    // With theta = f64::MAX the capped objective is the plain l1 objective.
    let cfg = MsmtflConfig {
        inner: *config,
        ..MsmtflConfig::new(lambda, f64::MAX).with_stages(1)
    };
    msmtfl_fit(data, &cfg, None)
}

struct GroupLasso<'a> {
    data: &'a TaskDataset,
    lambda: f64,
    lipschitz: f64,
}

impl CompositeProblem for GroupLasso<'_> {
    fn smooth_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        self.data.loss_unchecked(x)
    }

    fn smooth_value_and_gradient(&self, x: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        self.data.loss_and_gradient_unchecked(x)
    }

    fn penalty_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        self.lambda * row_l2_sum(x)
    }

    fn prox(&self, v: ArrayView2<'_, f64>, step: f64) -> Array2<f64> {
        row_group_l2_prox(v, step * self.lambda)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// `max |(x - prox(x - grad f(x), 1))|`, zero exactly at minimizers.
fn gradient_mapping_residual<P: CompositeProblem>(problem: &P, x: ArrayView2<'_, f64>) -> f64 {
    let (_, g) = problem.smooth_value_and_gradient(x);
    let moved = problem.prox((&x - &g).view(), 1.0);
    (&x - &moved).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn single_stage(
    weights: WeightMatrix,
    split: Option<DirtySplit>,
    objective: f64,
    res: &SolveResult,
    residual: f64,
) -> FitResult {
    FitResult {
        stages: vec![StageTrace {
            stage: 1,
            objective,
            inner_iterations: res.iterations,
            inner_converged: res.converged,
            kkt_residual: residual,
            param_error_l21: None,
        }],
        reg_weights_history: Vec::new(),
        stage_solutions: vec![weights.clone()],
        weights,
        split,
    }
}

/// Row-wise group Lasso `l(W) + lambda sum_j ||w^j||_2`, started from zero.
pub fn l12_fit(data: &TaskDataset, lambda: f64, config: &SolverConfig) -> Result<FitResult> {
    positive("lambda", lambda)?;
    let problem = GroupLasso {
        data,
        lambda,
        lipschitz: lipschitz_constant(data)?,
    };
    let init = Array2::zeros((data.dim(), data.task_count()));
    let res = fista_solve(&problem, init.view(), config)?;
    let residual = gradient_mapping_residual(&problem, res.solution.view());
    let weights = WeightMatrix::new(res.solution.clone())?;
    Ok(single_stage(weights, None, res.final_objective, &res, residual))
}

/// Stacked `[S | B]` (a `d x 2m` matrix) for the dirty model.
struct Dirty<'a> {
    data: &'a TaskDataset,
    lambda_s: f64,
    lambda_b: f64,
    lipschitz: f64,
}

impl Dirty<'_> {
    fn tasks(&self) -> usize {
        self.data.task_count()
    }

    fn combined(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let m = self.tasks();
        &x.slice(s![.., ..m]) + &x.slice(s![.., m..])
    }
}

impl CompositeProblem for Dirty<'_> {
    fn smooth_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        self.data.loss_unchecked(self.combined(x).view())
    }

    fn smooth_value_and_gradient(&self, x: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        let (f, g) = self.data.loss_and_gradient_unchecked(self.combined(x).view());
        let stacked = ndarray::concatenate(Axis(1), &[g.view(), g.view()]).expect("same shapes");
        (f, stacked)
    }

    fn penalty_value(&self, x: ArrayView2<'_, f64>) -> f64 {
        let m = self.tasks();
        dirty_penalty(x.slice(s![.., ..m]), x.slice(s![.., m..]), self.lambda_s, self.lambda_b)
    }

    fn prox(&self, v: ArrayView2<'_, f64>, step: f64) -> Array2<f64> {
        let m = self.tasks();
        let sparse = soft_threshold_matrix(v.slice(s![.., ..m]), step * self.lambda_s);
        let block = row_linf_prox(v.slice(s![.., m..]), step * self.lambda_b);
        ndarray::concatenate(Axis(1), &[sparse.view(), block.view()]).expect("same shapes")
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// Dirty model `l(S + B) + lambda_s ||S||_{1,1} + lambda_b sum_j ||b^j||_inf`
/// started from `S = B = 0`.
pub fn dirty_fit(data: &TaskDataset, lambda_s: f64, lambda_b: f64, config: &SolverConfig) -> Result<FitResult> {
    positive("lambda_s", lambda_s)?;
    positive("lambda_b", lambda_b)?;
    let m = data.task_count();
    // The Hessian of l(S + B) in (S, B) is [[H, H], [H, H]], with norm 2 ||H||.
    let problem = Dirty {
        data,
        lambda_s,
        lambda_b,
        lipschitz: 2.0 * lipschitz_constant(data)?,
    };
    let init = Array2::zeros((data.dim(), 2 * m));
    let res = fista_solve(&problem, init.view(), config)?;
    let residual = gradient_mapping_residual(&problem, res.solution.view());
    let split = DirtySplit {
        sparse: res.solution.slice(s![.., ..m]).to_owned(),
        block: res.solution.slice(s![.., m..]).to_owned(),
    };
    let weights = WeightMatrix::new(split.combined())?;
    Ok(single_stage(weights, Some(split), res.final_objective, &res, residual))
}

/// Smallest `lambda` for which `W = 0` solves the Lasso: `max |grad l(0)|`.
pub fn lasso_critical_lambda(data: &TaskDataset) -> f64 {
    let g = data.gradient_unchecked(Array2::zeros((data.dim(), data.task_count())).view());
    g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Smallest `lambda` for which `W = 0` solves the row group Lasso: `max_j ||grad^j l(0)||_2`.
pub fn l12_critical_lambda(data: &TaskDataset) -> f64 {
    let g = data.gradient_unchecked(Array2::zeros((data.dim(), data.task_count())).view());
    g.axis_iter(Axis(0))
        .map(|row| row.dot(&row).sqrt())
        .fold(0.0, f64::max)
}

/// Critical `(lambda_s, lambda_b)` for the dirty model: `S = 0` needs
/// `lambda_s >= max |g|`, `B = 0` needs `lambda_b >= max_j ||g^j||_1`.
pub fn dirty_critical_lambdas(data: &TaskDataset) -> (f64, f64) {
    let g = data.gradient_unchecked(Array2::zeros((data.dim(), data.task_count())).view());
    let ls = g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let lb = g
        .axis_iter(Axis(0))
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    (ls, lb)
}

/// Uniform `[-scale, scale]` matrix from a seeded ChaCha20 stream, for
/// initialization-independence checks.
pub fn random_init(dim: usize, tasks: usize, seed: u64, scale: f64) -> WeightMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let entries = Array2::from_shape_simple_fn((dim, tasks), || rng.random_range(-scale..=scale));
    WeightMatrix::new(entries).expect("finite uniform draws")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> TaskDataset {
        TaskDataset::new(vec![
            (array![[1.0, 0.5], [0.2, 1.0], [0.3, -0.4]], array![1.0, 2.0, 0.5]),
            (array![[0.7, 0.1], [-0.3, 0.8], [1.0, 1.0]], array![-1.0, 0.5, 0.2]),
        ])
        .unwrap()
    }

    #[test]
    fn reweight_examples() {
        let w = WeightMatrix::new(array![[0.25, -0.25], [2.0, 1.0]]).unwrap();
        assert_eq!(reweight(&w, 2.0, 1.0).unwrap().as_array(), &array![2.0, 0.0]);
        // Boundary: ||w^j||_1 == theta gets weight 0.
        let w = WeightMatrix::new(array![[0.5, 0.5]]).unwrap();
        assert_eq!(reweight(&w, 2.0, 1.0).unwrap().as_array(), &array![0.0]);
        let z = WeightMatrix::zeros(3, 2);
        assert_eq!(reweight(&z, 0.7, 1.0).unwrap().as_array(), &array![0.7, 0.7, 0.7]);
        assert!(reweight(&z, 0.0, 1.0).is_err());
    }

    #[test]
    fn huge_weights_give_zero() {
        let data = toy();
        let lam = lasso_critical_lambda(&data);
        let weights = RegWeights::uniform(2, lam * 1.01);
        let init = WeightMatrix::new(array![[1.0, -1.0], [0.5, 2.0]]).unwrap();
        let w = weighted_lasso_fit(&data, &weights, &init, &SolverConfig::default()).unwrap();
        assert!(w.as_array().iter().all(|v| v.abs() < 1e-9));
        let w0 = weighted_lasso_fit(&data, &weights, &WeightMatrix::zeros(2, 2), &SolverConfig::default()).unwrap();
        assert!(w0.is_zero());
    }

    #[test]
    fn kkt_examples() {
        let data = toy();
        let lam = lasso_critical_lambda(&data);
        let weights = RegWeights::uniform(2, lam);
        assert_eq!(kkt_residual(&data, &WeightMatrix::zeros(2, 2), &weights).unwrap(), 0.0);

        let weights = RegWeights::uniform(2, 0.05);
        let w = weighted_lasso_fit(&data, &weights, &WeightMatrix::zeros(2, 2), &SolverConfig::default()).unwrap();
        assert!(kkt_residual(&data, &w, &weights).unwrap() <= 1e-5);
        let mut perturbed = w.clone().into_inner();
        let (j, i) = perturbed
            .indexed_iter()
            .find(|(_, v)| **v != 0.0)
            .map(|(idx, _)| idx)
            .expect("an active coordinate");
        perturbed[[j, i]] += 0.1;
        let perturbed = WeightMatrix::new(perturbed).unwrap();
        assert!(kkt_residual(&data, &perturbed, &weights).unwrap() > 0.0);
    }

    #[test]
    fn zero_response_gives_zero_every_stage() {
        let data = TaskDataset::new(vec![
            (array![[1.0, 0.5], [0.2, 1.0]], array![0.0, 0.0]),
            (array![[0.7, 0.1], [-0.3, 0.8]], array![0.0, 0.0]),
        ])
        .unwrap();
        let fit = msmtfl_fit(&data, &MsmtflConfig::new(0.1, 0.5).with_stages(4), None).unwrap();
        for w in &fit.stage_solutions {
            assert!(w.is_zero());
        }
    }

    #[test]
    fn single_stage_is_lasso() {
        let data = toy();
        let cfg = MsmtflConfig::new(0.05, 0.3).with_stages(1);
        let ms = msmtfl_fit(&data, &cfg, None).unwrap();
        let lasso = lasso_fit(&data, 0.05, &SolverConfig::default()).unwrap();
        assert_eq!(ms.weights, lasso.weights);
        assert_eq!(ms.reg_weights_history[0], RegWeights::uniform(2, 0.05));
    }

    #[test]
    fn per_task_mode_is_deterministic() {
        let data = toy();
        let base = MsmtflConfig::new(0.02, 0.2).with_stages(3);
        let seq = MsmtflConfig {
            inner_mode: InnerMode::PerTask(Execution::Sequential),
            ..base
        };
        let par = MsmtflConfig {
            inner_mode: InnerMode::PerTask(Execution::Parallel),
            ..base
        };
        let a = msmtfl_fit(&data, &seq, None).unwrap();
        let b = msmtfl_fit(&data, &par, None).unwrap();
        assert_eq!(a.stage_solutions, b.stage_solutions);
        let joint = msmtfl_fit(&data, &base, None).unwrap();
        for (x, y) in a.stage_solutions.iter().zip(&joint.stage_solutions) {
            assert!((x.as_array() - y.as_array()).iter().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn critical_lambdas_zero_out_baselines() {
        let data = toy();
        let cfg = SolverConfig::default();
        assert!(l12_fit(&data, l12_critical_lambda(&data) * 1.001, &cfg).unwrap().weights.is_zero());
        let (ls, lb) = dirty_critical_lambdas(&data);
        let fit = dirty_fit(&data, ls * 1.001, lb * 1.001, &cfg).unwrap();
        assert!(fit.weights.is_zero());
        let split = fit.split.unwrap();
        assert!(split.sparse.iter().chain(split.block.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let data = toy();
        assert!(msmtfl_fit(&data, &MsmtflConfig::new(-1.0, 1.0), None).is_err());
        assert!(msmtfl_fit(&data, &MsmtflConfig::new(1.0, 1.0).with_stages(0), None).is_err());
        let bad_init = WeightMatrix::zeros(3, 2);
        assert!(msmtfl_fit_from(&data, &MsmtflConfig::new(1.0, 1.0), &bad_init, None).is_err());
        let w = RegWeights::uniform(5, 1.0);
        assert!(weighted_lasso_fit(&data, &w, &WeightMatrix::zeros(2, 2), &SolverConfig::default()).is_err());
        assert!(kkt_residual(&data, &WeightMatrix::zeros(2, 2), &w).is_err());
        assert!(l12_fit(&data, 0.0, &SolverConfig::default()).is_err());
        assert!(dirty_fit(&data, 1.0, 0.0, &SolverConfig::default()).is_err());
    }
}
