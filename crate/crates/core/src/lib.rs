//! Multi-stage multi-task feature learning.
//!
//! The crate fits `d x m` weight matrices for `m` linear regression tasks
//! that share a feature space. The main estimator minimizes the squared loss
//! plus a capped `l1,l1` penalty by repeatedly solving reweighted Lasso
//! problems with an accelerated proximal gradient solver. Lasso, `l1,2` and
//! dirty-model baselines, synthetic data generation, sparse eigenvalue
//! diagnostics and the experiment harness behind the `msmtfl` binary live
//! alongside it.
//!
//! Batch loops (seeds, grid points, per-task solves, support enumeration)
//! run on rayon when the `parallel` feature is enabled and an
//! [`Execution::Parallel`] strategy is requested; results are identical to the
//! sequential path because every map preserves input order.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fista;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod prox;

mod par;

pub use algorithms::{
    dirty_critical_lambdas, dirty_fit, kkt_residual, l12_critical_lambda, l12_fit, lasso_critical_lambda,
    lasso_fit, msmtfl_fit, msmtfl_fit_from, random_init, reweight, weighted_lasso_fit, FitResult, InnerMode,
    MsmtflConfig,
};
pub use data::{
    generate_synthetic, kfold_indices, load_csv, read_csv, split_indices, split_train_test, write_csv,
    SplitIndices, SyntheticInstance, SyntheticSpec,
};
pub use diagnostics::{
    sparse_eigenvalues, sparse_eigenvalues_with, theorem3_report, BoundParams, BoundReport, SparseEigenOptions,
    SparseEigenResult,
};
pub use error::{Error, Result};
pub use fista::{fista_solve, CompositeProblem, FnProblem, SolveResult, SolverConfig, StepSize};
pub use metrics::{amse, lpq_norm, nmse, param_error_l21, OuterAxis};
pub use model::{
    lipschitz_constant, loss_gradient, loss_value, objective_value, objective_value_split, penalty_value,
    DirtySplit, RegWeights, RegularizerSpec, StageTrace, Task, TaskDataset, WeightMatrix,
};
pub use par::Execution;
