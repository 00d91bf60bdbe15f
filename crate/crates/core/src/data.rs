//! Four-input toy regression data: generation, summary statistics and CSV I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;
use crate::{Error, Result};

/// Input dimension of the toy problem.
pub const TOY_DIM: usize = 4;

/// Noise-free or noisy toy target
/// `1 - |x0| - x1^2 - x2 - exp(x3) + noise`.
///
/// # Panics
///
/// If `x` does not have exactly four components.
pub fn g_true(x: &[f64], noise: f64) -> f64 {
    assert_eq!(x.len(), TOY_DIM, "g_true takes a 4-vector");
    1.0 - x[0].abs() - x[1] * x[1] - x[2] - x[3].exp() + noise
}

/// Paired samples `(x_n, y_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dataset dimension must be positive".into()));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::Shape {
                expected: inputs.len(),
                got: outputs.len(),
            });
        }
        for (n, row) in inputs.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    got: row.len(),
                });
            }
            if !row.iter().all(|v| v.is_finite()) || !outputs[n].is_finite() {
                return Err(Error::Numeric(format!("sample {n} is not finite")));
            }
        }
        Ok(Self {
            dim,
            inputs,
            outputs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn sample(&self, index: usize) -> Result<(&[f64], f64)> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        Ok((&self.inputs[index], self.outputs[index]))
    }
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub n: usize,
}

impl DataStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Mean and population (divisor `n`) standard deviation of each input
/// dimension, computed in two passes.
pub fn stats(data: &Dataset) -> Result<DataStats> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len() as f64;
    let mut mu = vec![0.0; data.dim()];
    for row in data.inputs() {
        for (m, &v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; data.dim()];
    for row in data.inputs() {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mu) {
            *s += (v - m) * (v - m);
        }
    }
    let sigma = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(DataStats {
        mu,
        sigma,
        n: data.len(),
    })
}

/// Settings for sampling the toy dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n: usize,
    pub seed: u64,
    pub noise_std: f64,
    /// Sampling interval per input dimension.
    pub range: Vec<(f64, f64)>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            seed: 0,
            noise_std: 0.05,
            range: vec![(-1.0, 1.0); TOY_DIM],
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(
                "noise_std must be a nonnegative number".into(),
            ));
        }
        if self.range.len() != TOY_DIM {
            return Err(Error::Config(format!(
                "range must list {TOY_DIM} intervals, got {}",
                self.range.len()
            )));
        }
        if let Some((i, _)) = self
            .range
            .iter()
            .enumerate()
            .find(|(_, (lo, hi))| !(lo < hi && lo.is_finite() && hi.is_finite()))
        {
            return Err(Error::Config(format!("range[{i}] must satisfy lo < hi")));
        }
        Ok(())
    }
}

/// Samples inputs uniformly over `cfg.range` and labels them with
/// [`g_true`] plus Gaussian noise. Per sample, the four input draws precede
/// the noise draw.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut inputs = Vec::with_capacity(cfg.n);
    let mut outputs = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x: Vec<f64> = cfg
            .range
            .iter()
            .map(|&(lo, hi)| rng.uniform(lo, hi))
            .collect();
        let noise = if cfg.noise_std > 0.0 {
            rng.normal(0.0, cfg.noise_std)
        } else {
            0.0
        };
        outputs.push(g_true(&x, noise));
        inputs.push(x);
    }
    Dataset::new(TOY_DIM, inputs, outputs)
}

fn header(dim: usize) -> Vec<String> {
    (0..dim)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("y".to_owned()))
        .collect()
}

/// Writes `x0,...,x{m-1},y` rows. Floats use the shortest representation
/// that parses back to the same bits.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header(data.dim()).join(",")).map_err(io)?;
    for (row, y) in data.inputs().iter().zip(data.outputs()) {
        for v in row {
            write!(out, "{v:?},").map_err(io)?;
        }
        writeln!(out, "{y:?}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |line: u64, message: String| Error::Csv {
        path: path.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => csv_err(1, format!("{other:?}")),
        })?;
    let head = reader
        .headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .clone();
    let cols = head.len();
    if cols < 2 || head.iter().collect::<Vec<_>>() != header(cols - 1) {
        return Err(csv_err(
            1,
            format!("expected header {}", header(cols.max(2) - 1).join(",")),
        ));
    }
    let dim = cols - 1;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols {
            return Err(csv_err(
                line,
                format!("expected {cols} columns, found {}", record.len()),
            ));
        }
        let mut values = Vec::with_capacity(cols);
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                csv_err(
                    line,
                    format!(
                        "column {} is not a number: `{field}`",
                        head.get(c).unwrap_or("?")
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(csv_err(line, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
        outputs.push(values.pop().expect("cols >= 2"));
        inputs.push(values);
    }
    Dataset::new(dim, inputs, outputs)
}
