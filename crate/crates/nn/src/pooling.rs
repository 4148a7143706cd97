//! Graph-level readout.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::layers::Linear;
use crate::params::{ParamStore, Pass};
use crate::tape::Var;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    /// Mean of the final node states.
    Mean,
    /// Sum of the final node states.
    Sum,
    /// `sum_{i=1..T} sum_u W_i h_u^(i-1)`: one map per layer input.
    Layerwise,
    /// `sum_{i=1..T} W_i mean_u h_u^(i-1)`: layerwise maps over node means.
    LayerwiseMean,
}

impl PoolMode {
    pub fn is_layerwise(self) -> bool {
        matches!(self, PoolMode::Layerwise | PoolMode::LayerwiseMean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolingHead {
    pub mode: PoolMode,
    /// `T` maps `d -> c` in layerwise mode, empty otherwise.
    pub maps: Vec<Linear>,
    /// `d -> c` output layer after mean or sum pooling.
    pub output: Option<Linear>,
}

impl PoolingHead {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        mode: PoolMode,
        layers: usize,
        d: usize,
        out_dim: usize,
    ) -> Self {
        match mode {
            PoolMode::Layerwise | PoolMode::LayerwiseMean => Self {
                mode,
                maps: (0..layers)
                    .map(|i| Linear::new(store, rng, &format!("pool.map{i}"), d, out_dim, false))
                    .collect(),
                output: None,
            },
            PoolMode::Mean | PoolMode::Sum => Self {
                mode,
                maps: Vec::new(),
                output: Some(Linear::new(store, rng, "pool.output", d, out_dim, true)),
            },
        }
    }

    /// Whether the last layer's output feeds the readout.
    pub fn uses_final_layer(&self) -> bool {
        !self.mode.is_layerwise()
    }
}

fn graph_sum(pass: &mut Pass, h: Var, batch: &Batch) -> Var {
    pass.tape.segment_sum(h, Rc::clone(&batch.node_graph), batch.n_graphs)
}

fn graph_mean(pass: &mut Pass, h: Var, batch: &Batch) -> Var {
    let s = graph_sum(pass, h, batch);
    let inv: Vec<f64> = batch.sizes.iter().map(|&n| 1.0 / n.max(1) as f64).collect();
    pass.tape.scale_rows(s, Rc::new(inv))
}

/// Pooled representation: `graphs x d` for mean and sum, `graphs x c` in
/// layerwise mode. `history` holds `h^(0) .. h^(T)`; layerwise mode reads
/// only the first `T` entries.
pub fn pool(pass: &mut Pass, history: &[Var], batch: &Batch, head: &PoolingHead) -> Var {
    match head.mode {
        PoolMode::Sum => graph_sum(pass, *history.last().expect("non-empty history"), batch),
        PoolMode::Mean => graph_mean(pass, *history.last().expect("non-empty history"), batch),
        PoolMode::Layerwise | PoolMode::LayerwiseMean => {
            assert!(
                history.len() >= head.maps.len(),
                "layerwise pooling needs {} layer inputs, got {}",
                head.maps.len(),
                history.len()
            );
            let mut terms = Vec::with_capacity(head.maps.len());
            for (map, &h) in head.maps.iter().zip(history) {
                let s = if head.mode == PoolMode::Layerwise {
                    graph_sum(pass, h, batch)
                } else {
                    graph_mean(pass, h, batch)
                };
                terms.push(map.forward(pass, s));
            }
            pass.tape.add_all(&terms)
        }
    }
}

/// Final `graphs x c` output.
pub fn readout(pass: &mut Pass, history: &[Var], batch: &Batch, head: &PoolingHead) -> Var {
    let pooled = pool(pass, history, batch, head);
    match &head.output {
        Some(out) => out.forward(pass, pooled),
        None => pooled,
    }
}
