//! Synthetic multi-task regression instances, CSV ingestion and splitting.
//!
//! # Random stream
//!
//! Every random quantity is drawn from one `ChaCha20Rng` seeded with
//! `seed_from_u64(seed)`, in this order:
//!
//! 1. for each task `i = 0..m`, the `n x d` design in row-major order from
//!    `N(0, 1)`, after which every column is scaled to unit Euclidean norm;
//! 2. the `d x m` true weights in row-major order from `U[low, high)`;
//! 3. `round(zero_row_fraction * d)` rows chosen with
//!    `rand::seq::index::sample` and set to zero;
//! 4. the entries of the remaining rows are pooled in row-major order and
//!    `round(within_row_zero_fraction * pool)` of them, chosen the same way,
//!    are set to zero;
//! 5. for each task, `n` noise values `sigma * N(0, 1)`.
//!
//! ChaCha20 and the `rand_distr` samplers are platform independent, so an
//! instance depends on the seed alone.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{TaskDataset, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub tasks: usize,
    pub samples: usize,
    pub dim: usize,
    pub sigma: f64,
    pub zero_row_fraction: f64,
    pub within_row_zero_fraction: f64,
    pub coef_low: f64,
    pub coef_high: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(tasks: usize, samples: usize, dim: usize, sigma: f64, seed: u64) -> Self {
        SyntheticSpec {
            tasks,
            samples,
            dim,
            sigma,
            zero_row_fraction: 0.9,
            within_row_zero_fraction: 0.8,
            coef_low: -10.0,
            coef_high: 10.0,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 || self.samples == 0 || self.dim == 0 {
            return Err(Error::contract("m, n and d must be positive"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::contract("sigma must be finite and nonnegative"));
        }
        for (name, f) in [
            ("zero_row_fraction", self.zero_row_fraction),
            ("within_row_zero_fraction", self.within_row_zero_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::contract(format!("{name} must lie in [0, 1], got {f}")));
            }
        }
        if !(self.coef_low < self.coef_high) || !self.coef_low.is_finite() || !self.coef_high.is_finite() {
            return Err(Error::contract("coefficient range must satisfy low < high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub data: TaskDataset,
    pub truth: WeightMatrix,
    pub noise: Vec<Array1<f64>>,
    /// Rows removed by the row-zeroing step, ascending.
    pub zeroed_rows: Vec<usize>,
}

/// Draws an instance following the module-level stream description.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let SyntheticSpec { tasks: m, samples: n, dim: d, .. } = *spec;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let mut designs = Vec::with_capacity(m);
    for _ in 0..m {
        let mut x: Array2<f64> = Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut rng));
        for mut col in x.axis_iter_mut(Axis(1)) {
            let norm = col.dot(&col).sqrt();
            col /= norm;
        }
        designs.push(x);
    }

    let mut truth = Array2::from_shape_simple_fn((d, m), || rng.random_range(spec.coef_low..spec.coef_high));
    let zero_rows = (spec.zero_row_fraction * d as f64).round() as usize;
    let mut zeroed_rows = sample(&mut rng, d, zero_rows).into_vec();
    zeroed_rows.sort_unstable();
    for &j in &zeroed_rows {
        truth.row_mut(j).fill(0.0);
    }
    let pool: Vec<(usize, usize)> = (0..d)
        .filter(|j| zeroed_rows.binary_search(j).is_err())
        .flat_map(|j| (0..m).map(move |i| (j, i)))
        .collect();
    let within = (spec.within_row_zero_fraction * pool.len() as f64).round() as usize;
    for k in sample(&mut rng, pool.len(), within) {
        truth[pool[k]] = 0.0;
    }

    let mut noise = Vec::with_capacity(m);
    let mut tasks = Vec::with_capacity(m);
    for (i, x) in designs.into_iter().enumerate() {
        let delta: Array1<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.sigma * z
            })
            .collect();
        let y = x.dot(&truth.column(i)) + &delta;
        noise.push(delta);
        tasks.push((x, y));
    }

    Ok(SyntheticInstance {
        data: TaskDataset::new(tasks)?,
        truth: WeightMatrix::new(truth)?,
        noise,
        zeroed_rows,
    })
}

/// Reads the long CSV format `task,y,x1,...,xd`, one task per distinct label
/// in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TaskDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<TaskDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(&e))?,
        None => return Err(Error::parse(1, "empty file, expected header `task,y,x1,...`")),
    };
    let dim = check_header(&header)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != dim + 2 {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", dim + 2, rec.len()),
            ));
        }
        let label = rec[0].to_string();
        if label.is_empty() {
            return Err(Error::parse(line, "missing task label"));
        }
        let mut values = Vec::with_capacity(dim + 1);
        for (col, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(line, format!("column {} is not a number: {cell:?}", col + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("column {} is not finite", col + 1)));
            }
            values.push(v);
        }
        let entry = groups.entry(label.clone()).or_insert_with(|| {
            order.push(label);
            (Vec::new(), Vec::new())
        });
        entry.0.push(values[0]);
        entry.1.extend_from_slice(&values[1..]);
    }
    if order.is_empty() {
        return Err(Error::parse(2, "no data rows"));
    }

    let tasks = order
        .iter()
        .map(|label| {
            let (y, x) = groups.remove(label).expect("label registered");
            let n = y.len();
            let x = Array2::from_shape_vec((n, dim), x).expect("rows have dim entries");
            (x, Array1::from(y))
        })
        .collect();
    TaskDataset::new(tasks)
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(line, e.to_string())
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    if header.len() < 3 || &header[0] != "task" || &header[1] != "y" {
        return Err(Error::parse(1, "header must start with `task,y,x1`"));
    }
    for (k, name) in header.iter().enumerate().skip(2) {
        let expected = format!("x{}", k - 1);
        if name != expected {
            return Err(Error::parse(1, format!("unknown header column {name:?}, expected {expected:?}")));
        }
    }
    Ok(header.len() - 2)
}

/// Writes `data` in the long CSV format, labelling tasks `task0, task1, ...`.
pub fn write_csv(data: &TaskDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("task,y");
    for j in 1..=data.dim() {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for (i, t) in data.tasks().iter().enumerate() {
        for (row, y) in t.design().axis_iter(Axis(0)).zip(t.response()) {
            out.push_str(&format!("task{i},{y:e}"));
            for v in row {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Per-task train/test indices; both lists ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

/// Random per-task split with `max(1, round(ratio * n_i))` training samples,
/// leaving at least one test sample.
pub fn split_indices(sizes: &[usize], train_ratio: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::contract(format!("training ratio must lie in (0, 1), got {train_ratio}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(sizes.len());
    let mut test = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        if n < 2 {
            return Err(Error::contract(format!("task {i} has {n} samples, at least 2 are needed to split")));
        }
        let k = ((train_ratio * n as f64).round() as usize).clamp(1, n - 1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut tr = perm[..k].to_vec();
        let mut te = perm[k..].to_vec();
        tr.sort_unstable();
        te.sort_unstable();
        train.push(tr);
        test.push(te);
    }
    Ok(SplitIndices { train, test })
}

pub fn split_train_test(data: &TaskDataset, train_ratio: f64, seed: u64) -> Result<(TaskDataset, TaskDataset)> {
    let idx = split_indices(&data.sample_counts(), train_ratio, seed)?;
    Ok((data.select(&idx.train)?, data.select(&idx.test)?))
}

/// `k` disjoint folds covering `0..n`, sizes differing by at most one, each
/// sorted ascending.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::contract(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::contract(format!("cannot split {n} samples into {k} folds")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}
