//! JSON model files.
//!
//! ```json
//! {"format_version": 1, "input_dim": 4,
//!  "layers": [{"activation": "tanh", "weights": [[...], ...], "bias": [...]}, ...]}
//! ```
//!
//! Numbers are written in shortest round-trip form and parsed with correct
//! rounding, so every `f64` parameter survives a save/load bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, Network};
use crate::{Error, Result, Scalar};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub input_dim: usize,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRecord {
    pub activation: String,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl<T: Scalar> From<&Network<T>> for ModelFile {
    fn from(net: &Network<T>) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                activation: l.activation().name().to_owned(),
                weights: l
                    .weights()
                    .chunks_exact(l.fan_in())
                    .map(|row| row.iter().map(|w| w.as_f64()).collect())
                    .collect(),
                bias: l.bias().iter().map(|b| b.as_f64()).collect(),
            })
            .collect();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: net.input_dim(),
            layers,
        }
    }
}

impl ModelFile {
    pub fn into_network<T: Scalar>(self) -> Result<Network<T>> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse {
                field: "format_version".into(),
                message: format!(
                    "unsupported version {}, expected {MODEL_FORMAT_VERSION}",
                    self.format_version
                ),
            });
        }
        let mut fan_in = self.input_dim;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, rec) in self.layers.into_iter().enumerate() {
            let activation: Activation = rec.activation.parse()?;
            let fan_out = rec.weights.len();
            if let Some((r, row)) = rec
                .weights
                .iter()
                .enumerate()
                .find(|(_, r)| r.len() != fan_in)
            {
                return Err(Error::Consistency(format!(
                    "layers[{k}].weights[{r}] has {} columns but the layer receives {fan_in} inputs",
                    row.len()
                )));
            }
            let weights = rec.weights.iter().flatten().map(|&w| T::of(w)).collect();
            let bias = rec.bias.iter().map(|&b| T::of(b)).collect();
            let layer = Layer::new(fan_in, fan_out, weights, bias, activation)
                .map_err(|e| Error::Consistency(format!("layers[{k}]: {e}")))?;
            layers.push(layer);
            fan_in = fan_out;
        }
        Network::new(self.input_dim, layers)
    }
}

/// Parses a model document; parse errors name the offending field path.
pub fn model_from_json<T: Scalar>(text: &str) -> Result<Network<T>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    file.into_network()
}

pub fn model_to_json<T: Scalar>(net: &Network<T>) -> String {
    serde_json::to_string_pretty(&ModelFile::from(net)).expect("model serialization is infallible")
}

pub fn save_model<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model_to_json(net);
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
