//! Experiment configuration: presets, the flat `key = value` file format and
//! command-line overrides.
//!
//! | key | value |
//! |-----|-------|
//! | `preset` | `small` or `tiny`; resets m, n, d and sigma |
//! | `tasks`, `samples`, `dim`, `sigma` | synthetic sizes and noise level |
//! | `zero_row_fraction`, `within_row_zero_fraction` | synthetic sparsity |
//! | `csv` | path of a long-format CSV file (real-data runs) |
//! | `seeds` | comma list of integers or half-open ranges `a..b` |
//! | `algorithms` | comma list of `msmtfl`, `lasso`, `l12`, `dirty` |
//! | `alphas` | lambda multipliers; `lambda = alpha * sqrt(ln(d m) / n)` |
//! | `theta_ratios` | theta / lambda in units of m (`50` means `50 m`) |
//! | `dirty_ratios` | lambda_s / lambda_b for the dirty model |
//! | `train_ratios` | per-task training fractions for real-data runs |
//! | `stages`, `folds` | maximum stage count, cross-validation folds |
//! | `eta`, `s` | confidence level and support size for the bound report |
//! | `max_iterations`, `tolerance` | inner solver limits |
//! | `execution` | `parallel` or `sequential` |
//! | `out` | output CSV path |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::fista::SolverConfig;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    ErrorVsStage,
    ErrorVsLambda,
    RealDataCv,
    Diagnose,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::ErrorVsStage => "error-vs-stage",
            ExperimentKind::ErrorVsLambda => "error-vs-lambda",
            ExperimentKind::RealDataCv => "real-cv",
            ExperimentKind::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Msmtfl,
    Lasso,
    L12,
    Dirty,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Msmtfl, Algorithm::Lasso, Algorithm::L12, Algorithm::Dirty];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Msmtfl => "msmtfl",
            Algorithm::Lasso => "lasso",
            Algorithm::L12 => "l12",
            Algorithm::Dirty => "dirty",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "msmtfl" => Ok(Algorithm::Msmtfl),
            "lasso" => Ok(Algorithm::Lasso),
            "l12" | "l1,2" => Ok(Algorithm::L12),
            "dirty" | "dirtymtl" => Ok(Algorithm::Dirty),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(PathBuf),
}

/// Named synthetic sizes. The seed field is overwritten per run.
pub fn preset(name: &str) -> Result<SyntheticSpec> {
    match name {
        "small" => Ok(SyntheticSpec::new(10, 30, 100, 0.01, 0)),
        "tiny" => Ok(SyntheticSpec::new(3, 15, 20, 0.005, 0)),
        other => Err(Error::Config(format!("unknown preset {other:?}, expected small or tiny"))),
    }
}

/// `count` multipliers spaced evenly in log scale over `[low, high]`.
pub fn log_grid(low: f64, high: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![low];
    }
    let (a, b) = (low.log10(), high.log10());
    (0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub algorithms: Vec<Algorithm>,
    pub alphas: Vec<f64>,
    /// theta / lambda in units of the task count.
    pub theta_ratios: Vec<f64>,
    /// lambda_s / lambda_b.
    pub dirty_ratios: Vec<f64>,
    pub source: DataSource,
    pub seeds: Vec<u64>,
    pub train_ratios: Vec<f64>,
    pub stages: usize,
    pub folds: usize,
    pub eta: f64,
    pub s: Option<usize>,
    pub solver: SolverConfig,
    pub execution: Execution,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for each experiment kind on the `small` preset (`tiny` for
    /// the bound report).
    pub fn new(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            kind,
            algorithms: vec![Algorithm::Msmtfl],
            alphas: vec![0.002],
            theta_ratios: vec![50.0],
            dirty_ratios: vec![1.0, 0.5, 0.2, 0.1],
            source: DataSource::Synthetic(preset("small").expect("builtin preset")),
            seeds: (0..10).collect(),
            train_ratios: vec![0.15, 0.2, 0.25],
            stages: 10,
            folds: 3,
            eta: 0.05,
            s: None,
            solver: SolverConfig::default(),
            execution: Execution::default(),
            out: None,
        };
        match kind {
            ExperimentKind::ErrorVsStage => base,
            ExperimentKind::ErrorVsLambda => ExperimentConfig {
                algorithms: Algorithm::ALL.to_vec(),
                alphas: log_grid(1e-4, 1.0, 25),
                theta_ratios: vec![50.0, 10.0, 2.0, 0.4],
                ..base
            },
            ExperimentKind::RealDataCv => ExperimentConfig {
                algorithms: Algorithm::ALL.to_vec(),
                alphas: log_grid(1e-3, 1.0, 7),
                theta_ratios: vec![50.0, 10.0, 2.0, 0.4],
                source: DataSource::Csv(PathBuf::new()),
                ..base
            },
            ExperimentKind::Diagnose => ExperimentConfig {
                source: DataSource::Synthetic(preset("tiny").expect("builtin preset")),
                seeds: (0..20).collect(),
                ..base
            },
        }
    }

    /// Reads a config file and applies it on top of the defaults for `kind`.
    pub fn from_file(kind: ExperimentKind, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = ExperimentConfig::new(kind);
        config.apply_text(&text)?;
        Ok(config)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", k + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", k + 1, strip_config(e))))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not `key=value`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => {
                let mut spec = preset(value)?;
                if let DataSource::Synthetic(old) = &self.source {
                    spec.zero_row_fraction = old.zero_row_fraction;
                    spec.within_row_zero_fraction = old.within_row_zero_fraction;
                }
                self.source = DataSource::Synthetic(spec);
            }
            "tasks" | "m" => self.synthetic_mut()?.tasks = parse(key, value)?,
            "samples" | "n" => self.synthetic_mut()?.samples = parse(key, value)?,
            "dim" | "d" => self.synthetic_mut()?.dim = parse(key, value)?,
            "sigma" => self.synthetic_mut()?.sigma = parse(key, value)?,
            "zero_row_fraction" => self.synthetic_mut()?.zero_row_fraction = parse(key, value)?,
            "within_row_zero_fraction" => self.synthetic_mut()?.within_row_zero_fraction = parse(key, value)?,
            "csv" => self.source = DataSource::Csv(PathBuf::from(value)),
            "seeds" => self.seeds = parse_seeds(value)?,
            "algorithms" => self.algorithms = parse_list(key, value)?,
            "alphas" => self.alphas = parse_list(key, value)?,
            "theta_ratios" => self.theta_ratios = parse_list(key, value)?,
            "dirty_ratios" => self.dirty_ratios = parse_list(key, value)?,
            "train_ratios" => self.train_ratios = parse_list(key, value)?,
            "stages" => self.stages = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "s" => self.s = Some(parse(key, value)?),
            "max_iterations" => self.solver.max_iterations = parse(key, value)?,
            "tolerance" => self.solver.rel_tolerance = parse(key, value)?,
            "execution" => {
                self.execution = match value {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    other => return Err(Error::Config(format!("unknown execution {other:?}"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    fn synthetic_mut(&mut self) -> Result<&mut SyntheticSpec> {
        match &mut self.source {
            DataSource::Synthetic(spec) => Ok(spec),
            DataSource::Csv(_) => Err(Error::Config("synthetic settings conflict with a csv source".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.seeds.is_empty() {
            return fail("seed list is empty");
        }
        let mut distinct = self.seeds.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != self.seeds.len() {
            return fail("seed list has duplicates");
        }
        if self.algorithms.is_empty() {
            return fail("algorithm list is empty");
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return fail("alphas must be a nonempty list of positive numbers");
        }
        let uses = |a: Algorithm| self.algorithms.contains(&a);
        if uses(Algorithm::Msmtfl) && (self.theta_ratios.is_empty() || self.theta_ratios.iter().any(|r| !(*r > 0.0))) {
            return fail("theta_ratios must be a nonempty list of positive numbers");
        }
        if uses(Algorithm::Dirty) && (self.dirty_ratios.is_empty() || self.dirty_ratios.iter().any(|r| !(*r > 0.0))) {
            return fail("dirty_ratios must be a nonempty list of positive numbers");
        }
        if self.stages == 0 {
            return fail("stages must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return fail("eta must lie in (0, 1)");
        }
        self.solver.validate()?;
        match (&self.source, self.kind) {
            (DataSource::Synthetic(_), ExperimentKind::RealDataCv) => fail("real-cv needs a csv source"),
            (DataSource::Csv(_), k) if k != ExperimentKind::RealDataCv => fail("this experiment needs a synthetic source"),
            (DataSource::Synthetic(spec), _) => spec.validate(),
            (DataSource::Csv(path), _) => {
                if path.as_os_str().is_empty() {
                    return fail("real-cv needs a csv path");
                }
                if self.train_ratios.is_empty() || self.train_ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                    return fail("train_ratios must lie in (0, 1)");
                }
                if self.folds < 2 {
                    return fail("folds must be at least 2");
                }
                Ok(())
            }
        }
    }

    /// `lambda = alpha * sqrt(ln(d m) / n)`.
    pub fn lambda_for(alpha: f64, dim: usize, tasks: usize, samples: usize) -> f64 {
        alpha * (((dim * tasks) as f64).ln() / samples as f64).sqrt()
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Parses `0,3,7` and half-open ranges such as `0..10`.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (u64, u64) = (parse("seeds", a.trim())?, parse("seeds", b.trim())?);
            if a >= b {
                return Err(Error::Config(format!("empty seed range {item:?}")));
            }
            seeds.extend(a..b);
        } else {
            seeds.push(parse("seeds", item)?);
        }
    }
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(seeds)
}
