//! Whole-graph models: input encoding, a stack of layers and a readout.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::{Batch, Needs};
use crate::layers::{
    centrality_encode, gat_layer, gcn_layer, gin_layer, graphormer_lite_layer, rspn_layer, spn_layer,
    Centrality, GatLayerWeights, GcnLayerWeights, GinLayerWeights, GraphormerLayerWeights, Linear,
    RspnLayerWeights, SpnLayerWeights,
};
use crate::params::{ParamId, ParamStore, Pass};
use crate::pooling::{readout, PoolMode, PoolingHead};
use crate::tape::{Mat, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Spn,
    Rspn,
    GraphormerLite,
    GinBaseline,
    GcnBaseline,
    GatBaseline,
}

impl ModelKind {
    pub fn is_baseline(self) -> bool {
        matches!(self, ModelKind::GinBaseline | ModelKind::GcnBaseline | ModelKind::GatBaseline)
    }

    pub fn has_hop_weights(self) -> bool {
        matches!(self, ModelKind::Spn | ModelKind::Rspn)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Spn => "spn",
            ModelKind::Rspn => "rspn",
            ModelKind::GraphormerLite => "graphormer-lite",
            ModelKind::GinBaseline => "gin-baseline",
            ModelKind::GcnBaseline => "gcn-baseline",
            ModelKind::GatBaseline => "gat-baseline",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown model `{s}`"))
    }
}

/// How node inputs become `d`-dimensional states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputEncoding {
    /// Learnable embedding per node color.
    Colors { count: usize },
    /// Linear map of dense node features.
    Features { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub input: InputEncoding,
    /// Relation count for R-SPN; ignored elsewhere.
    #[serde(default)]
    pub relations: usize,
    pub dim: usize,
    pub layers: usize,
    pub k: usize,
    pub out_dim: usize,
    pub pooling: PoolMode,
    #[serde(default)]
    pub dropout: f64,
    /// Largest degree with its own centrality embedding.
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Largest distance with its own attention bias.
    #[serde(default = "default_max_distance")]
    pub max_distance: usize,
}

fn default_max_degree() -> usize {
    64
}

fn default_max_distance() -> usize {
    5
}

impl ModelConfig {
    pub fn new(kind: ModelKind, input: InputEncoding, dim: usize, layers: usize, k: usize, out_dim: usize) -> Self {
        Self {
            kind,
            input,
            relations: 0,
            dim,
            layers,
            k: if kind.is_baseline() { 1 } else { k },
            out_dim,
            pooling: PoolMode::Layerwise,
            dropout: 0.0,
            max_degree: default_max_degree(),
            max_distance: default_max_distance(),
        }
    }

    /// Every violated constraint, empty when the config is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim == 0 {
            out.push("dim must be positive".to_string());
        }
        if self.layers == 0 {
            out.push("layers must be positive".to_string());
        }
        if self.k == 0 {
            out.push("k must be positive".to_string());
        }
        if self.kind.is_baseline() && self.k != 1 {
            out.push(format!("{} uses direct edges only, k must be 1", self.kind.name()));
        }
        if self.out_dim == 0 {
            out.push("out_dim must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            out.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.kind == ModelKind::Rspn && self.relations == 0 {
            out.push("rspn needs at least one relation".to_string());
        }
        match self.input {
            InputEncoding::Colors { count: 0 } => out.push("color count must be positive".to_string()),
            InputEncoding::Features { dim: 0 } => out.push("feature dim must be positive".to_string()),
            _ => {}
        }
        out
    }

    /// Structures a batch must carry for this model.
    pub fn needs(&self) -> Needs {
        Needs {
            k: self.k,
            relations: if self.kind == ModelKind::Rspn { self.relations } else { 0 },
            gcn: self.kind == ModelKind::GcnBaseline,
            gat: self.kind == ModelKind::GatBaseline,
            distances: self.kind == ModelKind::GraphormerLite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{0} has no hop weights")]
    NoHopWeights(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputLayer {
    Embedding(ParamId),
    Linear(Linear),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Spn(SpnLayerWeights),
    Rspn(RspnLayerWeights),
    Graphormer(GraphormerLayerWeights),
    Gin(GinLayerWeights),
    Gcn(GcnLayerWeights),
    Gat(GatLayerWeights),
}

impl LayerWeights {
    pub fn forward(&self, pass: &mut Pass, h: Var, batch: &Batch) -> Var {
        match self {
            LayerWeights::Spn(w) => spn_layer(pass, h, batch, w),
            LayerWeights::Rspn(w) => rspn_layer(pass, h, batch, w),
            LayerWeights::Graphormer(w) => graphormer_lite_layer(pass, h, batch, w),
            LayerWeights::Gin(w) => gin_layer(pass, h, batch, w),
            LayerWeights::Gcn(w) => gcn_layer(pass, h, batch, w),
            LayerWeights::Gat(w) => gat_layer(pass, h, batch, w),
        }
    }

    pub fn alpha_logits(&self) -> Option<ParamId> {
        match self {
            LayerWeights::Spn(w) => Some(w.alpha_logits),
            LayerWeights::Rspn(w) => Some(w.alpha_logits),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub input: InputLayer,
    pub centrality: Option<Centrality>,
    pub layers: Vec<LayerWeights>,
    pub head: PoolingHead,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(ModelError::Config(problems));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.dim;
        let input = match config.input {
            InputEncoding::Colors { count } => {
                // Unit-variance uniform entries.
                let bound = 3f64.sqrt();
                let table = Mat::from_shape_fn((count, d), |_| {
                    rand::Rng::gen_range(&mut rng, -bound..=bound)
                });
                InputLayer::Embedding(store.add("input.embedding", table))
            }
            InputEncoding::Features { dim } => {
                InputLayer::Linear(Linear::new(&mut store, &mut rng, "input.linear", dim, d, true))
            }
        };
        let centrality = (config.kind == ModelKind::GraphormerLite)
            .then(|| Centrality::new(&mut store, &mut rng, "centrality", config.max_degree, d));
        let layers = (0..config.layers)
            .map(|t| {
                let name = format!("layer{t}");
                match config.kind {
                    ModelKind::Spn => {
                        LayerWeights::Spn(SpnLayerWeights::new(&mut store, &mut rng, &name, config.k, d))
                    }
                    ModelKind::Rspn => LayerWeights::Rspn(RspnLayerWeights::new(
                        &mut store,
                        &mut rng,
                        &name,
                        config.k,
                        config.relations,
                        d,
                    )),
                    ModelKind::GraphormerLite => LayerWeights::Graphormer(GraphormerLayerWeights::new(
                        &mut store,
                        &mut rng,
                        &name,
                        d,
                        config.max_distance,
                    )),
                    ModelKind::GinBaseline => {
                        LayerWeights::Gin(GinLayerWeights::new(&mut store, &mut rng, &name, d))
                    }
                    ModelKind::GcnBaseline => {
                        LayerWeights::Gcn(GcnLayerWeights::new(&mut store, &mut rng, &name, d))
                    }
                    ModelKind::GatBaseline => {
                        LayerWeights::Gat(GatLayerWeights::new(&mut store, &mut rng, &name, d))
                    }
                }
            })
            .collect();
        let head = PoolingHead::new(&mut store, &mut rng, config.pooling, config.layers, d, config.out_dim);
        Ok(Self {
            config,
            store,
            input,
            centrality,
            layers,
            head,
        })
    }

    /// Input node states `h^(0)`, centrality encoding included.
    pub fn encode(&self, pass: &mut Pass, batch: &Batch) -> Var {
        let h = match &self.input {
            InputLayer::Embedding(table) => {
                let t = pass.param(*table);
                pass.tape.gather(t, Rc::clone(&batch.colors))
            }
            InputLayer::Linear(lin) => {
                let x = batch.features.clone().expect("model expects node features");
                let x = pass.tape.leaf(x);
                lin.forward(pass, x)
            }
        };
        match &self.centrality {
            Some(c) => centrality_encode(pass, h, &batch.degrees, c),
            None => h,
        }
    }

    /// `h^(0) .. h^(T)` starting from the given input states. With
    /// `skip_unread` the last layer is not evaluated when the readout does
    /// not consume it.
    pub fn node_history(&self, pass: &mut Pass, batch: &Batch, h0: Var, skip_unread: bool) -> Vec<Var> {
        let mut history = vec![h0];
        let count = if skip_unread && !self.head.uses_final_layer() {
            self.layers.len() - 1
        } else {
            self.layers.len()
        };
        let mut h = h0;
        for layer in &self.layers[..count] {
            h = layer.forward(pass, h, batch);
            h = pass.dropout(h, self.config.dropout);
            history.push(h);
        }
        history
    }

    /// Graph-level outputs, `graphs x out_dim`.
    pub fn forward(&self, pass: &mut Pass, batch: &Batch) -> Var {
        let h0 = self.encode(pass, batch);
        let history = self.node_history(pass, batch, h0, true);
        readout(pass, &history, batch, &self.head)
    }

    /// Softmaxed hop weights per layer.
    pub fn alphas(&self) -> Result<Vec<Vec<f64>>, ModelError> {
        if !self.config.kind.has_hop_weights() {
            return Err(ModelError::NoHopWeights(self.config.kind.name()));
        }
        Ok(self
            .layers
            .iter()
            .filter_map(LayerWeights::alpha_logits)
            .map(|id| softmax(self.store.get(id).iter().copied()))
            .collect())
    }
}

pub fn softmax(logits: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = logits.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}
