//! Result rows and their CSV serialization.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: &str = "experiment,seed,algorithm,stage,lambda,theta_or_ratio,metric,value,wall_ms";

/// A concrete seed, or `all` for rows aggregated over the seed list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeedLabel {
    Seed(u64),
    All,
}

impl fmt::Display for SeedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedLabel::Seed(s) => write!(f, "{s}"),
            SeedLabel::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: SeedLabel,
    pub algorithm: String,
    pub stage: usize,
    pub lambda: f64,
    /// theta / lambda for the capped penalty, lambda_s / lambda_b for the
    /// dirty model, 0 otherwise.
    pub theta_or_ratio: f64,
    pub metric: String,
    pub value: f64,
    pub wall_ms: f64,
}

impl ResultRow {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.seed.cmp(&other.seed))
            .then(self.algorithm.cmp(&other.algorithm))
            .then(self.stage.cmp(&other.stage))
            .then(self.lambda.total_cmp(&other.lambda))
            .then(self.theta_or_ratio.total_cmp(&other.theta_or_ratio))
            .then(self.metric.cmp(&other.metric))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new() -> Self {
        ResultTable::default()
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ResultRow>) {
        self.rows.extend(rows);
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows whose metric equals `metric`.
    pub fn metric<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    /// Sorts rows by every key column.
    pub fn sort(&mut self) {
        self.rows.sort_by(ResultRow::key_cmp);
    }

    /// Serializes in sorted order with 17 significant digits per number.
    pub fn to_csv_string(&self) -> String {
        let mut sorted: Vec<&ResultRow> = self.rows.iter().collect();
        sorted.sort_by(|a, b| a.key_cmp(b));
        let mut out = String::with_capacity(64 * (sorted.len() + 1));
        out.push_str(HEADER);
        out.push('\n');
        for r in sorted {
            out.push_str(&format!(
                "{},{},{},{},{:.16e},{:.16e},{},{:.16e},{:.16e}\n",
                quote(&r.experiment),
                r.seed,
                quote(&r.algorithm),
                r.stage,
                r.lambda,
                r.theta_or_ratio,
                quote(&r.metric),
                r.value,
                r.wall_ms
            ));
        }
        out
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != HEADER {
            return Err(Error::parse(1, "unexpected result header"));
        }
        let mut table = ResultTable::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::parse(line, format!("bad number {:?}", &rec[i])))
            };
            let seed = match &rec[1] {
                "all" => SeedLabel::All,
                s => SeedLabel::Seed(s.parse().map_err(|_| Error::parse(line, format!("bad seed {s:?}")))?),
            };
            table.push(ResultRow {
                experiment: rec[0].to_string(),
                seed,
                algorithm: rec[2].to_string(),
                stage: rec[3].parse().map_err(|_| Error::parse(line, "bad stage"))?,
                lambda: num(4)?,
                theta_or_ratio: num(5)?,
                metric: rec[6].to_string(),
                value: num(7)?,
                wall_ms: num(8)?,
            });
        }
        Ok(table)
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes the table as CSV; a header-only file for an empty table.
pub fn emit_results(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    File::create(path)
        .and_then(|mut f| f.write_all(table.to_csv_string().as_bytes()))
        .map_err(|e| Error::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ResultTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ResultTable::from_csv_reader(file)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}
