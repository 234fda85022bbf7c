//! Text checkpoint format.
//!
//! A checkpoint is a pretty-printed JSON document:
//!
//! ```text
//! {
//!   "format": "sico-checkpoint",
//!   "version": 1,
//!   "scalar": "f64",
//!   "seed": 7,
//!   "spec": { "input": {...}, "layers": [...] },
//!   "parameters": [ { "layer": 0, "weights": { "shape": [2, 2], "values": [...] },
//!                     "bias": { "shape": [2], "values": [...] } } ]
//! }
//! ```
//!
//! Values are written with shortest round-trip formatting, so loading and
//! re-saving a checkpoint reproduces it byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{LayerParams, NetworkParams};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const FORMAT: &str = "sico-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    scalar: String,
    seed: u64,
    spec: NetworkSpec,
    parameters: Vec<LayerEntry>,
}

#[derive(Serialize, Deserialize)]
struct LayerEntry {
    layer: usize,
    weights: Array,
    bias: Array,
}

#[derive(Serialize, Deserialize)]
struct Array {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Array {
    fn product(&self) -> usize {
        self.shape.iter().product()
    }
}

pub fn to_string<T: Scalar>(params: &NetworkParams<T>) -> String {
    let parameters = params
        .layers()
        .iter()
        .enumerate()
        .filter_map(|(layer, p)| {
            p.as_ref().map(|p| LayerEntry {
                layer,
                weights: Array {
                    shape: vec![p.weights.rows(), p.weights.cols()],
                    values: p.weights.values().iter().map(|v| v.as_f64()).collect(),
                },
                bias: Array { shape: vec![p.bias.len()], values: p.bias.iter().map(|v| v.as_f64()).collect() },
            })
        })
        .collect();
    let doc = Document {
        format: FORMAT.to_string(),
        version: VERSION,
        scalar: T::NAME.to_string(),
        seed: params.seed(),
        spec: params.spec().clone(),
        parameters,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("checkpoint serializes");
    text.push('\n');
    text
}

pub fn from_str<T: Scalar>(text: &str) -> Result<NetworkParams<T>> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::format(e.line() as u64, e.to_string()))?;
    if doc.format != FORMAT {
        return Err(Error::format(0, format!("not a checkpoint (format '{}')", doc.format)));
    }
    if doc.version != VERSION {
        return Err(Error::format(0, format!("unsupported checkpoint version {}", doc.version)));
    }
    if doc.scalar != T::NAME {
        return Err(Error::config(format!("checkpoint holds {} values, expected {}", doc.scalar, T::NAME)));
    }
    let mut layers: Vec<Option<LayerParams<T>>> = vec![None; doc.spec.layers.len()];
    for entry in doc.parameters {
        let slot = layers
            .get_mut(entry.layer)
            .ok_or_else(|| Error::config(format!("parameters for missing layer {}", entry.layer)))?;
        if entry.weights.shape.len() != 2
            || entry.weights.product() != entry.weights.values.len()
            || entry.bias.shape.len() != 1
            || entry.bias.product() != entry.bias.values.len()
        {
            return Err(Error::config(format!("layer {}: declared shape disagrees with values", entry.layer)));
        }
        let weights = Matrix::new(
            entry.weights.shape[0],
            entry.weights.shape[1],
            entry.weights.values.into_iter().map(T::lit).collect(),
        )?;
        *slot = Some(LayerParams { weights, bias: entry.bias.values.into_iter().map(T::lit).collect() });
    }
    NetworkParams::from_layers(doc.spec, doc.seed, layers)
}

pub fn save<T: Scalar>(params: &NetworkParams<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_string(params))?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<NetworkParams<T>> {
    from_str(&fs::read_to_string(path)?)
}
