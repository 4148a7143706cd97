//! JSON weight checkpoints.
//!
//! ```json
//! {
//!   "format": "splab-checkpoint",
//!   "version": 1,
//!   "config": { ...model config... },
//!   "params":  [{"name": "layer0.eps", "shape": [1, 1], "data": [0.0]}, ...],
//!   "buffers": [{"name": "layer0.mlp.bn0.running_mean", "shape": [1, 64], "data": [...]}, ...],
//!   "meta": { ...free-form... }
//! }
//! ```
//!
//! `data` is row-major. Non-finite entries are written as the strings
//! `"inf"`, `"-inf"` and `"nan"`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, ModelConfig, ModelError};
use crate::tape::Mat;

pub const FORMAT: &str = "splab-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint (format {found:?}, version {version})")]
    Format { found: String, version: u32 },
    #[error("tensor {name}: {msg}")]
    Tensor { name: String, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Number {
    Finite(f64),
    Special(Special),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Special {
    #[serde(rename = "inf")]
    Inf,
    #[serde(rename = "-inf")]
    NegInf,
    #[serde(rename = "nan")]
    Nan,
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Number::Finite(x)
        } else if x.is_nan() {
            Number::Special(Special::Nan)
        } else if x > 0.0 {
            Number::Special(Special::Inf)
        } else {
            Number::Special(Special::NegInf)
        }
    }
}

impl From<Number> for f64 {
    fn from(n: Number) -> f64 {
        match n {
            Number::Finite(x) => x,
            Number::Special(Special::Inf) => f64::INFINITY,
            Number::Special(Special::NegInf) => f64::NEG_INFINITY,
            Number::Special(Special::Nan) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: [usize; 2],
    data: Vec<Number>,
}

impl NamedTensor {
    fn new(name: &str, m: &Mat) -> Self {
        Self {
            name: name.to_string(),
            shape: [m.nrows(), m.ncols()],
            data: m.iter().map(|&x| x.into()).collect(),
        }
    }

    fn to_mat(&self) -> Result<Mat, CheckpointError> {
        let data: Vec<f64> = self.data.iter().map(|&n| n.into()).collect();
        Mat::from_shape_vec((self.shape[0], self.shape[1]), data).map_err(|e| CheckpointError::Tensor {
            name: self.name.clone(),
            msg: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: ModelConfig,
    params: Vec<NamedTensor>,
    buffers: Vec<NamedTensor>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn from_model(model: &Model, meta: serde_json::Value) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            config: model.config.clone(),
            params: model.store.named().map(|(n, m)| NamedTensor::new(n, m)).collect(),
            buffers: model.store.named_buffers().map(|(n, m)| NamedTensor::new(n, m)).collect(),
            meta,
        }
    }

    /// Rebuilds the model and loads every tensor by name.
    pub fn to_model(&self) -> Result<Model, CheckpointError> {
        let mut model = Model::new(self.config.clone(), 0)?;
        let mut values = Vec::with_capacity(self.params.len());
        let expected: Vec<(String, (usize, usize))> =
            model.store.named().map(|(n, m)| (n.to_string(), m.dim())).collect();
        if expected.len() != self.params.len() {
            return Err(CheckpointError::Tensor {
                name: "*".to_string(),
                msg: format!("expected {} tensors, found {}", expected.len(), self.params.len()),
            });
        }
        for ((name, dim), t) in expected.iter().zip(&self.params) {
            let m = t.to_mat()?;
            if &t.name != name || m.dim() != *dim {
                return Err(CheckpointError::Tensor {
                    name: t.name.clone(),
                    msg: format!("expected {name} with shape {dim:?}"),
                });
            }
            values.push(m);
        }
        let names = model.store.buffer_names().to_vec();
        if names.len() != self.buffers.len() {
            return Err(CheckpointError::Tensor {
                name: "*".to_string(),
                msg: "buffer count mismatch".to_string(),
            });
        }
        let mut buffers = Vec::with_capacity(names.len());
        for (name, t) in names.iter().zip(&self.buffers) {
            if &t.name != name {
                return Err(CheckpointError::Tensor {
                    name: t.name.clone(),
                    msg: format!("expected buffer {name}"),
                });
            }
            buffers.push(t.to_mat()?);
        }
        model.store.set_all(values, buffers);
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(CheckpointError::Format {
                found: c.format,
                version: c.version,
            });
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Softmaxed hop weights stored in a checkpoint, one vector per layer.
pub fn report_alphas(checkpoint: &Checkpoint) -> Result<Vec<Vec<f64>>, CheckpointError> {
    Ok(checkpoint.to_model()?.alphas()?)
}
