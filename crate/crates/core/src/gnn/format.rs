use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::GnnModel;
use crate::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// Serialisable form of a [`GnnModel`]. `rows` is the output width and
/// `cols` the input width of a layer; weights are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub q: usize,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GnnModel {
    pub fn to_file(&self) -> ModelFile {
        let layers = Self::layer_names()
            .into_iter()
            .zip(self.layers())
            .map(|(name, d)| LayerRecord {
                name,
                rows: d.outputs,
                cols: d.inputs,
                weights: d.weights.clone(),
                bias: d.bias.clone(),
            })
            .collect();
        ModelFile { version: MODEL_VERSION, q: self.q, layers }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model version {}, expected {MODEL_VERSION}",
                file.version
            )));
        }
        if file.q == 0 {
            return Err(Error::Model("embedding width must be positive".into()));
        }
        let mut model = GnnModel::new(file.q, 0).zeros_like();
        let names = Self::layer_names();
        if file.layers.len() != names.len() {
            return Err(Error::Model(format!("expected {} layers, found {}", names.len(), file.layers.len())));
        }
        for ((dense, name), rec) in model.layers_mut().into_iter().zip(&names).zip(&file.layers) {
            if &rec.name != name {
                return Err(Error::Model(format!("expected layer {name}, found {}", rec.name)));
            }
            if rec.rows != dense.outputs
                || rec.cols != dense.inputs
                || rec.weights.len() != rec.rows * rec.cols
                || rec.bias.len() != rec.rows
            {
                return Err(Error::Model(format!("layer {name} has inconsistent shape")));
            }
            dense.weights.clone_from(&rec.weights);
            dense.bias.clone_from(&rec.bias);
        }
        if !model.is_finite() {
            return Err(Error::Model("non-finite parameter".into()));
        }
        Ok(model)
    }
}
