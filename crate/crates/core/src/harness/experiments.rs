use std::collections::BTreeMap;
use std::time::Instant;

use crate::algorithms::{dirty_fit, l12_fit, lasso_fit, msmtfl_fit, FitResult, MsmtflConfig};
use crate::data::{generate_synthetic, kfold_indices, load_csv, split_train_test, SyntheticInstance, SyntheticSpec};
use crate::diagnostics::{residual_correlation, residual_correlation_bound, theorem3_report, BoundParams, SparseEigenOptions};
use crate::error::{Error, Result};
use crate::metrics::{amse, nmse, param_error_l21};
use crate::model::TaskDataset;
use crate::par;

use super::config::{Algorithm, DataSource, ExperimentConfig, ExperimentKind};
use super::results::{mean_std, median, ResultRow, ResultTable, SeedLabel};

/// One point of an algorithm's secondary grid: theta / lambda for the capped
/// penalty, lambda_s / lambda_b for the dirty model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub algorithm: Algorithm,
    pub ratio: f64,
}

impl Variant {
    /// Expands the algorithm list with the configured ratio grids.
    pub fn expand(config: &ExperimentConfig, tasks: usize) -> Vec<Variant> {
        let mut out = Vec::new();
        for &algorithm in &config.algorithms {
            match algorithm {
                Algorithm::Msmtfl => out.extend(config.theta_ratios.iter().map(|r| Variant {
                    algorithm,
                    ratio: r * tasks as f64,
                })),
                Algorithm::Dirty => out.extend(config.dirty_ratios.iter().map(|&ratio| Variant { algorithm, ratio })),
                _ => out.push(Variant { algorithm, ratio: 0.0 }),
            }
        }
        out
    }

    /// Stage recorded for the final solution of this variant.
    pub fn final_stage(&self, stages: usize) -> usize {
        if self.algorithm == Algorithm::Msmtfl {
            stages
        } else {
            1
        }
    }

    pub fn fit(&self, data: &TaskDataset, lambda: f64, config: &ExperimentConfig) -> Result<FitResult> {
        match self.algorithm {
            Algorithm::Msmtfl => {
                let cfg = MsmtflConfig {
                    inner: config.solver,
                    ..MsmtflConfig::new(lambda, self.ratio * lambda).with_stages(config.stages)
                };
                msmtfl_fit(data, &cfg, None)
            }
            Algorithm::Lasso => lasso_fit(data, lambda, &config.solver),
            Algorithm::L12 => l12_fit(data, lambda, &config.solver),
            Algorithm::Dirty => dirty_fit(data, self.ratio * lambda, lambda, &config.solver),
        }
    }
}

/// Runs the experiment selected by `config.kind`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    match config.kind {
        ExperimentKind::ErrorVsStage => run_error_vs_stage(config),
        ExperimentKind::ErrorVsLambda => run_error_vs_lambda(config),
        ExperimentKind::RealDataCv => run_real_data_cv(config),
        ExperimentKind::Diagnose => run_diagnose(config),
    }
}

fn synthetic_spec(config: &ExperimentConfig) -> Result<SyntheticSpec> {
    match &config.source {
        DataSource::Synthetic(spec) => Ok(*spec),
        DataSource::Csv(_) => Err(Error::Config(format!("{} needs a synthetic source", config.kind.id()))),
    }
}

fn instances(config: &ExperimentConfig, spec: &SyntheticSpec) -> Result<Vec<SyntheticInstance>> {
    par::try_map(config.execution, &config.seeds, |&seed| generate_synthetic(&spec.with_seed(seed)))
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64() * 1e3))
}

struct RowKey<'a> {
    experiment: &'a str,
    algorithm: Algorithm,
    stage: usize,
    lambda: f64,
    ratio: f64,
}

impl RowKey<'_> {
    fn row(&self, seed: SeedLabel, metric: &str, value: f64, wall_ms: f64) -> ResultRow {
        ResultRow {
            experiment: self.experiment.to_string(),
            seed,
            algorithm: self.algorithm.name().to_string(),
            stage: self.stage,
            lambda: self.lambda,
            theta_or_ratio: self.ratio,
            metric: metric.to_string(),
            value,
            wall_ms,
        }
    }
}

type GroupKey = (String, String, usize, u64, u64, String);

/// Adds `<metric>_mean`, `<metric>_std` (population) and `<metric>_median`
/// rows over the per-seed rows of each metric in `metrics`.
fn aggregate(table: &mut ResultTable, metrics: &[&str], with_median: bool) {
    let mut groups: BTreeMap<GroupKey, (ResultRow, Vec<f64>, f64)> = BTreeMap::new();
    for r in table.rows() {
        if r.seed == SeedLabel::All || !metrics.contains(&r.metric.as_str()) {
            continue;
        }
        let key = (
            r.experiment.clone(),
            r.algorithm.clone(),
            r.stage,
            r.lambda.to_bits(),
            r.theta_or_ratio.to_bits(),
            r.metric.clone(),
        );
        let entry = groups.entry(key).or_insert_with(|| (r.clone(), Vec::new(), 0.0));
        entry.1.push(r.value);
        entry.2 += r.wall_ms;
    }
    for (_, (proto, values, wall)) in groups {
        let (mean, std) = mean_std(&values);
        let wall = wall / values.len() as f64;
        let mut stats = vec![("mean", mean), ("std", std)];
        if with_median {
            stats.push(("median", median(&values)));
        }
        for (suffix, value) in stats {
            table.push(ResultRow {
                seed: SeedLabel::All,
                metric: format!("{}_{suffix}", proto.metric),
                value,
                wall_ms: wall,
                ..proto.clone()
            });
        }
    }
}

/// Per-stage estimation error of the multi-stage estimator for every seed
/// and `(alpha, theta ratio)` grid point. Stages after an early stop repeat
/// the final solution. A `lasso` entry in the algorithm list adds a stage-1
/// reference row.
pub fn run_error_vs_stage(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let spec = synthetic_spec(config)?;
    if let Some(a) = config.algorithms.iter().find(|a| !matches!(a, Algorithm::Msmtfl | Algorithm::Lasso)) {
        return Err(Error::Config(format!("error-vs-stage does not run {a}")));
    }
    let data = instances(config, &spec)?;
    let variants = Variant::expand(config, spec.tasks);
    let mut work = Vec::new();
    for (k, _) in config.seeds.iter().enumerate() {
        for &alpha in &config.alphas {
            for v in &variants {
                work.push((k, alpha, *v));
            }
        }
    }
    let experiment = config.kind.id();
    let rows = par::try_map(config.execution, &work, |&(k, alpha, v)| -> Result<Vec<ResultRow>> {
        let inst = &data[k];
        let seed = SeedLabel::Seed(config.seeds[k]);
        let lambda = ExperimentConfig::lambda_for(alpha, spec.dim, spec.tasks, spec.samples);
        let (fit, wall) = timed(|| v.fit(&inst.data, lambda, config))?;
        let last = v.final_stage(config.stages);
        let mut rows = Vec::with_capacity(2 * last);
        for stage in 1..=last {
            let key = RowKey { experiment, algorithm: v.algorithm, stage, lambda, ratio: v.ratio };
            let w = fit.solution_at(stage);
            let trace = &fit.stages[stage.min(fit.stages.len()) - 1];
            rows.push(key.row(seed, "l21_error", param_error_l21(w, &inst.truth)?, wall));
            rows.push(key.row(seed, "objective", trace.objective, wall));
        }
        Ok(rows)
    })?;
    let mut table = ResultTable::new();
    table.extend(rows.into_iter().flatten());
    aggregate(&mut table, &["l21_error"], true);
    table.sort();
    Ok(table)
}

/// Estimation error over the lambda grid for every algorithm variant, plus
/// each algorithm's minimum over its whole grid (`l21_error_min`, reported
/// at the minimizing lambda and ratio; the first grid point wins ties).
pub fn run_error_vs_lambda(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let spec = synthetic_spec(config)?;
    let data = instances(config, &spec)?;
    let variants = Variant::expand(config, spec.tasks);
    let mut work = Vec::new();
    for (k, _) in config.seeds.iter().enumerate() {
        for v in &variants {
            for &alpha in &config.alphas {
                work.push((k, *v, alpha));
            }
        }
    }
    let experiment = config.kind.id();
    let rows = par::try_map(config.execution, &work, |&(k, v, alpha)| -> Result<ResultRow> {
        let inst = &data[k];
        let lambda = ExperimentConfig::lambda_for(alpha, spec.dim, spec.tasks, spec.samples);
        let (fit, wall) = timed(|| v.fit(&inst.data, lambda, config))?;
        let key = RowKey {
            experiment,
            algorithm: v.algorithm,
            stage: v.final_stage(config.stages),
            lambda,
            ratio: v.ratio,
        };
        let err = param_error_l21(&fit.weights, &inst.truth)?;
        Ok(key.row(SeedLabel::Seed(config.seeds[k]), "l21_error", err, wall))
    })?;

    let mut table = ResultTable::new();
    // `work` is grouped by seed then algorithm, so the first minimum in
    // iteration order is the first grid point.
    let mut best: BTreeMap<(usize, Algorithm), ResultRow> = BTreeMap::new();
    for (row, &(k, v, _)) in rows.iter().zip(&work) {
        let slot = best.entry((k, v.algorithm)).or_insert_with(|| row.clone());
        if row.value < slot.value {
            *slot = row.clone();
        }
    }
    table.extend(rows);
    for (_, row) in best {
        table.push(ResultRow {
            metric: "l21_error_min".into(),
            ..row
        });
    }
    aggregate(&mut table, &["l21_error"], false);
    let mut min_groups: BTreeMap<String, (ResultRow, Vec<f64>)> = BTreeMap::new();
    for r in table.metric("l21_error_min") {
        min_groups
            .entry(r.algorithm.clone())
            .or_insert_with(|| (r.clone(), Vec::new()))
            .1
            .push(r.value);
    }
    for (_, (proto, values)) in min_groups {
        let (mean, std) = mean_std(&values);
        for (metric, value) in [("l21_error_min_mean", mean), ("l21_error_min_std", std)] {
            table.push(ResultRow {
                seed: SeedLabel::All,
                lambda: 0.0,
                theta_or_ratio: 0.0,
                metric: metric.into(),
                value,
                wall_ms: 0.0,
                ..proto.clone()
            });
        }
    }
    table.sort();
    Ok(table)
}

/// Experiment id of a real-data run at one training ratio.
pub fn real_cv_id(ratio: f64) -> String {
    format!("real-cv:ratio={ratio}")
}

fn seed_stream(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream
}

struct Choice {
    variant: Variant,
    lambda: f64,
    score: f64,
}

/// Picks the candidate with the smallest mean validation nMSE over `folds`
/// folds; exact ties go to the larger lambda, then to grid order.
fn cross_validate(
    train: &TaskDataset,
    candidates: &[(Variant, f64)],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<Choice> {
    let counts = train.sample_counts();
    let per_task: Vec<Vec<Vec<usize>>> = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| kfold_indices(n, config.folds, seed_stream(seed, 1 + i as u64)))
        .collect::<Result<_>>()?;
    let mut splits = Vec::with_capacity(config.folds);
    for f in 0..config.folds {
        let mut fit_rows = Vec::with_capacity(counts.len());
        let mut val_rows = Vec::with_capacity(counts.len());
        for folds in &per_task {
            val_rows.push(folds[f].clone());
            let mut rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            rest.sort_unstable();
            fit_rows.push(rest);
        }
        splits.push((train.select(&fit_rows)?, train.select(&val_rows)?));
    }
    let scores = par::try_map(config.execution, candidates, |&(v, lambda)| -> Result<f64> {
        let mut total = 0.0;
        for (fit_set, val_set) in &splits {
            let fit = v.fit(fit_set, lambda, config)?;
            let preds = val_set.predict(&fit.weights)?;
            let actual: Vec<_> = val_set.tasks().iter().map(|t| t.response().to_owned()).collect();
            total += nmse(&preds, &actual)?;
        }
        Ok(total / splits.len() as f64)
    })?;
    let mut best: Option<Choice> = None;
    for (&(variant, lambda), score) in candidates.iter().zip(scores) {
        let better = match &best {
            None => true,
            Some(b) => score < b.score || (score == b.score && lambda > b.lambda),
        };
        if better {
            best = Some(Choice { variant, lambda, score });
        }
    }
    best.ok_or_else(|| Error::Config("empty parameter grid".into()))
}

/// Real-data protocol: for every training ratio and seed, split each task,
/// tune every algorithm by k-fold cross-validation on the training part,
/// refit on the whole training part and score the test part.
///
/// `lambda = alpha * sqrt(ln(d m) / n)` with `n` the smallest per-task
/// training size.
pub fn run_real_data_cv(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let DataSource::Csv(path) = &config.source else {
        return Err(Error::Config("real-cv needs a csv source".into()));
    };
    let data = load_csv(path)?;
    let mut work = Vec::new();
    for &ratio in &config.train_ratios {
        for &seed in &config.seeds {
            for &algorithm in &config.algorithms {
                work.push((ratio, seed, algorithm));
            }
        }
    }
    let rows = par::try_map(config.execution, &work, |&(ratio, seed, algorithm)| -> Result<Vec<ResultRow>> {
        let start = Instant::now();
        let (train, test) = split_train_test(&data, ratio, seed)?;
        let n = train.sample_counts().into_iter().min().unwrap_or(1);
        let single = ExperimentConfig {
            algorithms: vec![algorithm],
            ..config.clone()
        };
        let (d, m) = (data.dim(), data.task_count());
        let candidates: Vec<(Variant, f64)> = Variant::expand(&single, m)
            .into_iter()
            .flat_map(|v| {
                config
                    .alphas
                    .iter()
                    .map(move |&a| (v, ExperimentConfig::lambda_for(a, d, m, n)))
            })
            .collect();
        let choice = cross_validate(&train, &candidates, config, seed_stream(seed, 0))?;
        let fit = choice.variant.fit(&train, choice.lambda, config)?;
        let preds = test.predict(&fit.weights)?;
        let actual: Vec<_> = test.tasks().iter().map(|t| t.response().to_owned()).collect();
        let wall = start.elapsed().as_secs_f64() * 1e3;
        let experiment = real_cv_id(ratio);
        let key = RowKey {
            experiment: &experiment,
            algorithm,
            stage: choice.variant.final_stage(config.stages),
            lambda: choice.lambda,
            ratio: choice.variant.ratio,
        };
        let seed = SeedLabel::Seed(seed);
        Ok(vec![
            key.row(seed, "nmse", nmse(&preds, &actual)?, wall),
            key.row(seed, "amse", amse(&preds, &actual)?, wall),
            key.row(seed, "cv_nmse", choice.score, wall),
        ])
    })?;
    let mut table = ResultTable::new();
    let rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
    let mut groups: BTreeMap<(String, String, String), (ResultRow, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric != "cv_nmse") {
        groups
            .entry((r.experiment.clone(), r.algorithm.clone(), r.metric.clone()))
            .or_insert_with(|| (r.clone(), Vec::new()))
            .1
            .push(r.value);
    }
    table.extend(rows);
    for (_, (proto, values)) in groups {
        let (mean, std) = mean_std(&values);
        for (suffix, value) in [("mean", mean), ("std", std)] {
            table.push(ResultRow {
                seed: SeedLabel::All,
                lambda: 0.0,
                theta_or_ratio: 0.0,
                metric: format!("{}_{suffix}", proto.metric),
                value,
                wall_ms: 0.0,
                ..proto.clone()
            });
        }
    }
    table.sort();
    Ok(table)
}

/// Bound report and measured error per seed on synthetic instances, using
/// the first alpha and theta ratio of the grid.
///
/// Scalar rows use stage 0; `bound`, `l21_error` and `bound_holds` are per
/// stage. Aggregate rows count qualifying seeds (`conditions_met_seeds`),
/// seeds where the measured error respects the bound among qualifying ones
/// (`bound_holds_seeds`), and seeds whose residual correlation respects its
/// bound (`residual_corr_holds_seeds`).
pub fn run_diagnose(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let spec = synthetic_spec(config)?;
    let data = instances(config, &spec)?;
    let lambda = ExperimentConfig::lambda_for(config.alphas[0], spec.dim, spec.tasks, spec.samples);
    let ratio = config.theta_ratios[0] * spec.tasks as f64;
    let theta = ratio * lambda;
    let params = BoundParams {
        sigma: spec.sigma,
        eta: config.eta,
        s: config.s,
        lambda,
        theta,
        stages: config.stages,
        eigen: SparseEigenOptions {
            execution: config.execution,
            ..SparseEigenOptions::default()
        },
    };
    let experiment = config.kind.id();
    let indices: Vec<usize> = (0..data.len()).collect();
    let rows = par::try_map(config.execution, &indices, |&k| -> Result<Vec<ResultRow>> {
        let inst = &data[k];
        let seed = SeedLabel::Seed(config.seeds[k]);
        let (report, report_ms) = timed(|| theorem3_report(&inst.data, &inst.truth, &params))?;
        let cfg = MsmtflConfig {
            inner: config.solver,
            ..MsmtflConfig::new(lambda, theta).with_stages(config.stages)
        };
        let (fit, fit_ms) = timed(|| msmtfl_fit(&inst.data, &cfg, Some(&inst.truth)))?;
        let upsilon = residual_correlation(&inst.data, &inst.truth)?;
        let upsilon_max = upsilon.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let upsilon_bound = residual_correlation_bound(
            spec.sigma,
            report.rho_plus_max_1,
            spec.dim,
            spec.tasks,
            report.n,
            config.eta,
        );
        let key = |stage| RowKey { experiment, algorithm: Algorithm::Msmtfl, stage, lambda, ratio };
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let c = report.conditions;
        let mut rows = vec![];
        for (metric, value) in [
            ("lambda_min", report.lambda_min),
            ("theta_min", report.theta_min),
            ("r_bar", report.r_bar as f64),
            ("s", report.s as f64),
            ("u", report.u),
            ("noise_term", report.noise_term),
            ("cond_row_strength", flag(c.row_strength)),
            ("cond_sparse_eigenvalue", flag(c.sparse_eigenvalue)),
            ("cond_lambda", flag(c.lambda)),
            ("cond_theta", flag(c.theta)),
            ("cond_all", flag(c.all())),
            ("residual_corr_max", upsilon_max),
            ("residual_corr_bound", upsilon_bound),
            ("residual_corr_holds", flag(upsilon_max <= upsilon_bound)),
        ] {
            rows.push(key(0).row(seed, metric, value, report_ms));
        }
        for stage in 1..=config.stages {
            let err = param_error_l21(fit.solution_at(stage), &inst.truth)?;
            let bound = report.bound_per_stage[stage - 1];
            rows.push(key(stage).row(seed, "bound", bound, report_ms));
            rows.push(key(stage).row(seed, "l21_error", err, fit_ms));
            rows.push(key(stage).row(seed, "bound_holds", flag(err <= bound), fit_ms));
        }
        Ok(rows)
    })?;
    let rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
    let qualifying: Vec<SeedLabel> = rows
        .iter()
        .filter(|r| r.metric == "cond_all" && r.value == 1.0)
        .map(|r| r.seed)
        .collect();
    let key = |stage| RowKey { experiment, algorithm: Algorithm::Msmtfl, stage, lambda, ratio };
    let count = |metric: &str, stage: usize, only_qualifying: bool| {
        rows.iter()
            .filter(|r| r.metric == metric && r.stage == stage && r.value == 1.0)
            .filter(|r| !only_qualifying || qualifying.contains(&r.seed))
            .count() as f64
    };
    let mut table = ResultTable::new();
    table.push(key(0).row(SeedLabel::All, "conditions_met_seeds", qualifying.len() as f64, 0.0));
    table.push(key(0).row(SeedLabel::All, "residual_corr_holds_seeds", count("residual_corr_holds", 0, false), 0.0));
    for stage in 1..=config.stages {
        table.push(key(stage).row(SeedLabel::All, "bound_holds_seeds", count("bound_holds", stage, true), 0.0));
    }
    table.extend(rows);
    table.sort();
    Ok(table)
}
