//! End-to-end run of the four-input toy problem:
//! generate data, fit the surrogate, freeze it and maximize its output
//! under the extrapolation and output-positivity penalties. Results of
//! several seeds are reduced to medians and compared against reference
//! values with acceptance bands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{self, g_true, DataStats, Dataset, GenConfig, TOY_DIM};
use crate::extremal::{multi_start, ExtremalConfig, ExtremalResult, InitStrategy};
use crate::losses::ConstraintFile;
use crate::nnet::{default_architecture, init_network, Activation, Network};
use crate::optim::{train, TrainConfig, TrainReport};
use crate::{Error, Result};

/// Published reference values for the toy problem.
pub mod reference {
    pub const MU: [f64; 4] = [0.007, -0.028, 0.005, 0.006];
    pub const SIGMA: [f64; 4] = [0.555, 0.577, 0.577, 0.567];
    pub const X_HAT: [f64; 4] = [-0.167, -0.0861, -1.193, -1.153];
    pub const Y_HAT: f64 = 1.702;
    pub const Y_HAT_TRUE: f64 = 1.832;
}

/// Resolved settings of every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub generation: GenConfig,
    pub architecture: Vec<(usize, Activation)>,
    pub init_seed: u64,
    pub training: TrainConfig,
    pub constraints: ConstraintFile,
    pub extremal: ExtremalConfig,
    pub init: InitStrategy,
}

impl ToyConfig {
    /// Full-size run: n = 1000, 4-64-64-1 tanh network, 8 restarts.
    pub fn standard(seed: u64) -> Self {
        Self {
            generation: GenConfig {
                seed,
                ..GenConfig::default()
            },
            architecture: default_architecture(),
            init_seed: seed,
            training: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            constraints: ConstraintFile::toy_default(),
            extremal: ExtremalConfig {
                restarts: 8,
                seed,
                ..ExtremalConfig::default()
            },
            init: InitStrategy::default(),
        }
    }

    /// Desk-scale run: n = 200, fewer epochs, restarts and iterations, and a
    /// larger learning rate so the short schedule still fits.
    pub fn quick(seed: u64) -> Self {
        let mut cfg = Self::standard(seed);
        cfg.generation.n = 200;
        cfg.training.epochs = 300;
        cfg.training.learning_rate = 3e-3;
        cfg.extremal.restarts = 4;
        cfg.extremal.max_iters = 5000;
        cfg
    }
}

/// Everything produced by one pipeline run.
#[derive(Debug, Clone)]
pub struct ToyRun {
    pub data: Dataset,
    pub stats: DataStats,
    /// Frozen surrogate.
    pub network: Network<f64>,
    pub train_report: TrainReport,
    pub result: ExtremalResult<f64>,
}

pub fn run_toy(cfg: &ToyConfig) -> Result<ToyRun> {
    let data = data::generate(&cfg.generation)?;
    let stats = data::stats(&data)?;
    let net = init_network(&cfg.architecture, TOY_DIM, cfg.init_seed)?;
    let (net, train_report) = train(net, &data, &cfg.training)?;
    let network = net.freeze();
    let loss = cfg.constraints.build(TOY_DIM, Some(&stats))?;
    let result = multi_start(&network, &loss, &cfg.extremal, &cfg.init, Some(&data))?;
    Ok(ToyRun {
        data,
        stats,
        network,
        train_report,
        result,
    })
}

/// Best constrained value of the noise-free target when the band edges sit
/// at `-2 sigma`: `1 + 2 sigma_2 - exp(-2 sigma_3)`.
pub fn constrained_optimum(sigma: &[f64]) -> f64 {
    g_true(&[0.0, 0.0, -2.0 * sigma[2], -2.0 * sigma[3]], 0.0)
}

/// Key numbers of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub validation_mse: f64,
    pub x_hat: Vec<f64>,
    pub y_hat: f64,
    pub final_loss: f64,
}

impl SeedOutcome {
    pub fn from_run(seed: u64, run: &ToyRun) -> Self {
        Self {
            seed,
            mu: run.stats.mu.clone(),
            sigma: run.stats.sigma.clone(),
            validation_mse: run.train_report.validation_mse,
            x_hat: run.result.x_hat.clone(),
            y_hat: run.result.y_hat,
            final_loss: run.result.final_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Acceptance bands for the reduced quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub mu: Band,
    pub sigma: Band,
    pub x_free: Band,
    pub x_bounded: Band,
    pub y_hat: Band,
    pub y_hat_true: Band,
    pub validation_mse: Band,
}

impl Bands {
    pub const STANDARD: Bands = Bands {
        mu: Band::new(-0.06, 0.06),
        sigma: Band::new(0.52, 0.62),
        x_free: Band::new(-0.30, 0.30),
        x_bounded: Band::new(-1.40, -0.90),
        y_hat: Band::new(1.55, 1.95),
        // constrained_optimum over the sigma band
        y_hat_true: Band::new(1.68, 1.96),
        validation_mse: Band::new(0.0, 0.01),
    };

    pub const QUICK: Bands = Bands {
        mu: Band::new(-0.15, 0.15),
        sigma: Band::new(0.45, 0.70),
        x_free: Band::new(-0.50, 0.50),
        x_bounded: Band::new(-1.70, -0.70),
        y_hat: Band::new(1.30, 2.20),
        y_hat_true: Band::new(1.50, 2.10),
        validation_mse: Band::new(0.0, 0.03),
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    /// Published value, when there is one.
    pub reference: Option<f64>,
    pub reproduced: f64,
    pub band: Band,
    pub pass: bool,
}

/// Median of a nonempty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Reduces per-seed outcomes to medians and checks them against `bands`.
pub fn compare(outcomes: &[SeedOutcome], bands: &Bands) -> Vec<ComparisonRow> {
    let med = |f: &dyn Fn(&SeedOutcome) -> f64| median(&outcomes.iter().map(f).collect::<Vec<_>>());
    let mut rows = Vec::new();
    let mut push = |quantity: String, reference: Option<f64>, reproduced: f64, band: Band| {
        rows.push(ComparisonRow {
            quantity,
            reference,
            reproduced,
            band,
            pass: band.contains(reproduced),
        })
    };
    for i in 0..TOY_DIM {
        push(
            format!("mu{i}"),
            Some(reference::MU[i]),
            med(&|o| o.mu[i]),
            bands.mu,
        );
    }
    for i in 0..TOY_DIM {
        push(
            format!("sigma{i}"),
            Some(reference::SIGMA[i]),
            med(&|o| o.sigma[i]),
            bands.sigma,
        );
    }
    for i in 0..TOY_DIM {
        let band = if i < 2 { bands.x_free } else { bands.x_bounded };
        push(
            format!("x_hat{i}"),
            Some(reference::X_HAT[i]),
            med(&|o| o.x_hat[i]),
            band,
        );
    }
    push(
        "y_hat".into(),
        Some(reference::Y_HAT),
        med(&|o| o.y_hat),
        bands.y_hat,
    );
    push(
        "y_hat_true".into(),
        Some(reference::Y_HAT_TRUE),
        med(&|o| constrained_optimum(&o.sigma)),
        bands.y_hat_true,
    );
    push(
        "validation_mse".into(),
        None,
        med(&|o| o.validation_mse),
        bands.validation_mse,
    );
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub quick: bool,
    pub seeds: Vec<u64>,
    pub outcomes: Vec<SeedOutcome>,
    pub rows: Vec<ComparisonRow>,
}

impl Reproduction {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Runs the toy pipeline for each seed and compares the medians.
pub fn reproduce(seeds: &[u64], quick: bool) -> Result<Reproduction> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut outcomes = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = if quick {
            ToyConfig::quick(seed)
        } else {
            ToyConfig::standard(seed)
        };
        let run = run_toy(&cfg)?;
        outcomes.push(SeedOutcome::from_run(seed, &run));
    }
    let bands = if quick { Bands::QUICK } else { Bands::STANDARD };
    let rows = compare(&outcomes, &bands);
    Ok(Reproduction {
        quick,
        seeds: seeds.to_vec(),
        outcomes,
        rows,
    })
}

/// Fixed-width text rendering of the comparison table.
pub fn format_table(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<16}{:>12}{:>14}{:>22}  {}\n",
        "quantity", "reference", "reproduced", "band", "result"
    );
    for r in rows {
        let reference = r
            .reference
            .map_or_else(|| "-".to_owned(), |p| format!("{p:.4}"));
        let band = format!("[{:.3}, {:.3}]", r.band.lo, r.band.hi);
        out.push_str(&format!(
            "{:<16}{:>12}{:>14.4}{:>22}  {}\n",
            r.quantity,
            reference,
            r.reproduced,
            band,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}

/// CSV with columns `quantity,reference,reproduced,band_lo,band_hi,pass`.
pub fn write_table_csv(rows: &[ComparisonRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "quantity,reference,reproduced,band_lo,band_hi,pass").map_err(io)?;
    for r in rows {
        let reference = r.reference.map_or_else(String::new, |p| format!("{p:?}"));
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{}",
            r.quantity, reference, r.reproduced, r.band.lo, r.band.hi, r.pass
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
