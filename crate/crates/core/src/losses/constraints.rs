//! JSON constraint files describing a composite loss.
//!
//! ```json
//! {"terms": [
//!   {"type": "extrapolation", "c": 2, "kappa1": 0.5, "stats": "from_data"},
//!   {"type": "output_positive_max", "kappa2": 10, "kappa_hat": 1}
//! ]}
//! ```
//!
//! Recognized types are `extremal`, `extrapolation`, `output_positive_max`
//! and `input_positivity`. Omitted constants take their defaults
//! (`kappa = 1`, `c = 2`, `kappa1 = 0.5`, `kappa2 = 10`, `kappa_hat = 1`,
//! `kappa3 = 1`). An extrapolation term either says `"stats": "from_data"`
//! (the default) or carries explicit `mu` and `sigma` arrays.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CompositeLoss, ExtrapolationConfig, ExtremalLossConfig, ExtremalMode, InputPositivityConfig,
    LossTerm, OutputPositiveMaxConfig,
};
use crate::data::DataStats;
use crate::{Error, Result, Scalar};

const TERM_TYPES: [&str; 4] = [
    "extremal",
    "extrapolation",
    "output_positive_max",
    "input_positivity",
];

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TermSpec {
    Extremal {
        #[serde(default)]
        mode: ExtremalMode,
        #[serde(default = "one")]
        kappa: f64,
    },
    Extrapolation {
        #[serde(default = "two")]
        c: f64,
        #[serde(default = "half")]
        kappa1: f64,
        #[serde(default, flatten)]
        stats: ExtrapolationSource,
    },
    OutputPositiveMax {
        #[serde(default = "ten")]
        kappa2: f64,
        #[serde(default = "one")]
        kappa_hat: f64,
    },
    InputPositivity {
        #[serde(default = "one")]
        kappa3: f64,
        /// All dimensions when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        active_dims: Option<Vec<usize>>,
    },
}

/// Where an extrapolation term takes `mu` and `sigma` from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtrapolationSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

/// A parsed constraint document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub terms: Vec<TermSpec>,
}

impl ConstraintFile {
    /// Extrapolation penalty at two standard deviations with `kappa1 = 0.5`
    /// plus the output-positive maximization loss with `kappa2 = 10`,
    /// `kappa_hat = 1`.
    pub fn toy_default() -> Self {
        Self {
            terms: vec![
                TermSpec::Extrapolation {
                    c: 2.0,
                    kappa1: 0.5,
                    stats: ExtrapolationSource {
                        stats: Some("from_data".into()),
                        ..Default::default()
                    },
                },
                TermSpec::OutputPositiveMax {
                    kappa2: 10.0,
                    kappa_hat: 1.0,
                },
            ],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            field: String::new(),
            message: e.to_string(),
        })?;
        let terms = raw
            .get("terms")
            .and_then(|t| t.as_array())
            .ok_or_else(|| Error::Parse {
                field: "terms".into(),
                message: "expected an array of loss terms".into(),
            })?;
        for (k, term) in terms.iter().enumerate() {
            match term.get("type").and_then(|t| t.as_str()) {
                Some(t) if TERM_TYPES.contains(&t) => {}
                Some(t) => {
                    return Err(Error::Config(format!(
                        "unknown loss term type `{t}` in terms[{k}]"
                    )))
                }
                None => {
                    return Err(Error::Parse {
                        field: format!("terms[{k}].type"),
                        message: "missing term type".into(),
                    })
                }
            }
        }
        serde_path_to_error::deserialize(raw).map_err(|e| Error::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constraint serialization is infallible")
    }

    pub fn needs_data_stats(&self) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t, TermSpec::Extrapolation { stats, .. } if stats.mu.is_none()))
    }

    /// Same document with every `from_data` reference replaced by explicit
    /// statistics, for audit trails.
    pub fn resolved(&self, stats: Option<&DataStats>) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                TermSpec::Extrapolation {
                    c,
                    kappa1,
                    stats: src,
                } => {
                    let (mu, sigma) = src.resolve(stats)?;
                    Ok(TermSpec::Extrapolation {
                        c: *c,
                        kappa1: *kappa1,
                        stats: ExtrapolationSource {
                            stats: None,
                            mu: Some(mu),
                            sigma: Some(sigma),
                        },
                    })
                }
                other => Ok(other.clone()),
            })
            .collect::<Result<_>>()?;
        Ok(Self { terms })
    }

    /// Builds the composite loss for a network with `dim` inputs.
    pub fn build<T: Scalar>(
        &self,
        dim: usize,
        stats: Option<&DataStats>,
    ) -> Result<CompositeLoss<T>> {
        let terms = self
            .terms
            .iter()
            .map(|t| t.build(dim, stats))
            .collect::<Result<Vec<_>>>()?;
        let loss = CompositeLoss::new(terms)?;
        loss.check_dim(dim)?;
        Ok(loss)
    }
}

impl ExtrapolationSource {
    fn resolve(&self, stats: Option<&DataStats>) -> Result<(Vec<f64>, Vec<f64>)> {
        match (&self.mu, &self.sigma, self.stats.as_deref()) {
            (Some(mu), Some(sigma), None) => Ok((mu.clone(), sigma.clone())),
            (None, None, None | Some("from_data")) => {
                let s = stats.ok_or_else(|| {
                    Error::Config(
                        "extrapolation term uses data statistics but no dataset was given".into(),
                    )
                })?;
                Ok((s.mu.clone(), s.sigma.clone()))
            }
            (None, None, Some(other)) => Err(Error::Config(format!(
                "unknown extrapolation stats source `{other}`"
            ))),
            _ => Err(Error::Config(
                "extrapolation term needs either `stats: \"from_data\"` or both `mu` and `sigma`"
                    .into(),
            )),
        }
    }
}

impl TermSpec {
    fn build<T: Scalar>(&self, dim: usize, stats: Option<&DataStats>) -> Result<LossTerm<T>> {
        Ok(match self {
            TermSpec::Extremal { mode, kappa } => {
                LossTerm::Extremal(ExtremalLossConfig::new(*mode, T::of(*kappa))?)
            }
            TermSpec::Extrapolation {
                c,
                kappa1,
                stats: src,
            } => {
                let (mu, sigma) = src.resolve(stats)?;
                let conv = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Vec<T>>();
                LossTerm::Extrapolation(ExtrapolationConfig::new(
                    conv(mu),
                    conv(sigma),
                    T::of(*c),
                    T::of(*kappa1),
                )?)
            }
            TermSpec::OutputPositiveMax { kappa2, kappa_hat } => LossTerm::OutputPositiveMax(
                OutputPositiveMaxConfig::new(T::of(*kappa2), T::of(*kappa_hat))?,
            ),
            TermSpec::InputPositivity {
                kappa3,
                active_dims,
            } => {
                let dims = active_dims.clone().unwrap_or_else(|| (0..dim).collect());
                LossTerm::InputPositivity(InputPositivityConfig::new(T::of(*kappa3), dims, dim)?)
            }
        })
    }
}
