//! Experiment drivers behind the `msmtfl` binary.
//!
//! Every driver returns a [`ResultTable`] whose rows are keyed by
//! experiment, seed, algorithm, stage, lambda and ratio. Seeds and grid
//! points run through the crate's order-preserving parallel map, and the
//! table is sorted before it is written, so identical configurations give
//! identical files apart from the timing column.

mod config;
mod experiments;
mod results;

pub use config::{log_grid, parse_seeds, preset, Algorithm, DataSource, ExperimentConfig, ExperimentKind};
pub use experiments::{
    real_cv_id, run_diagnose, run_error_vs_lambda, run_error_vs_stage, run_experiment, run_real_data_cv, Variant,
};
pub use results::{emit_results, mean_std, median, read_results, ResultRow, ResultTable, SeedLabel, HEADER};
