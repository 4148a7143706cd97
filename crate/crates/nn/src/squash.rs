//! Input sensitivity of node states: exact Jacobian norms through real
//! layers, powers of normalized hop adjacencies, and the analytic bound for
//! a normalized-aggregation probe model.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use splab_core::hops::{HopAdjacency, HopIndex};
use splab_core::Graph;

use crate::batch::Batch;
use crate::model::{InputEncoding, Model, ModelConfig, ModelKind};
use crate::params::{ParamStore, Pass};
use crate::pooling::PoolMode;
use crate::tape::{Mat, Pairs, Var};

/// Dense `M^q` for a square matrix.
fn dense_power(m: &Mat, q: usize) -> Mat {
    let n = m.nrows();
    let mut acc = Mat::eye(n);
    for _ in 0..q {
        acc = acc.dot(m);
    }
    acc
}

fn dense_hop(adj: &HopAdjacency, hop: usize) -> Mat {
    let n = adj.node_count();
    let mut m = Mat::zeros((n, n));
    for &(u, v, w) in adj.entries(hop) {
        m[[u, v]] = w;
    }
    m
}

/// `((A_hat_hop)^q)[u][v]`, computed with dense 64-bit products.
pub fn adjacency_power_entry(adj: &HopAdjacency, hop: usize, q: usize, u: usize, v: usize) -> f64 {
    assert!(q >= 1, "exponent must be at least 1");
    dense_power(&dense_hop(adj, hop), q)[[u, v]]
}

/// `((sum_i w_i A_hat_i)^q)[u][v]`.
pub fn mixed_power_entry(adj: &HopAdjacency, weights: &[f64], q: usize, u: usize, v: usize) -> f64 {
    let n = adj.node_count();
    let mut m = Mat::zeros((n, n));
    for (i, &w) in weights.iter().enumerate() {
        m.scaled_add(w, &dense_hop(adj, i + 1));
    }
    dense_power(&m, q)[[u, v]]
}

/// A map from input node states to node states after some layers.
pub trait NodeMap {
    fn dim(&self) -> usize;
    fn store(&self) -> &ParamStore;
    /// Node states after `layers` layers, starting from `h0`.
    fn apply(&self, pass: &mut Pass, graph: &Graph, h0: Var, layers: usize) -> Var;
}

impl NodeMap for Model {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn apply(&self, pass: &mut Pass, graph: &Graph, h0: Var, layers: usize) -> Var {
        assert!(layers <= self.layers.len(), "model has only {} layers", self.layers.len());
        let batch = Batch::from_graphs(std::slice::from_ref(graph), &self.config.needs());
        let mut h = h0;
        for layer in &self.layers[..layers] {
            h = layer.forward(pass, h, &batch);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Identity,
}

/// `h' = act(beta * sum_i w_i A_hat_i h)` with a 1-Lipschitz activation
/// and no learned parameters. Channels do not mix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub hop_weights: Vec<f64>,
    pub beta: f64,
    pub activation: Activation,
    pub dim: usize,
    store: ParamStore,
}

impl ProbeModel {
    pub fn new(hop_weights: Vec<f64>, beta: f64, activation: Activation, dim: usize) -> Self {
        Self {
            hop_weights,
            beta,
            activation,
            dim,
            store: ParamStore::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.hop_weights.len()
    }

    /// Bound on the Frobenius norm of `d h_u^(T) / d h_v^(0)`:
    /// `sqrt(d) * beta^T * (M^T)[u][v]` with `M = sum_i w_i A_hat_i`.
    pub fn bound(&self, graph: &Graph, layers: usize, u: usize, v: usize) -> f64 {
        let adj = HopAdjacency::build(&HopIndex::build(graph, self.k()));
        let abs: Vec<f64> = self.hop_weights.iter().map(|w| w.abs()).collect();
        let entry = mixed_power_entry(&adj, &abs, layers, u, v);
        (self.dim as f64).sqrt() * self.beta.abs().powi(layers as i32) * entry
    }
}

impl NodeMap for ProbeModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn apply(&self, pass: &mut Pass, graph: &Graph, h0: Var, layers: usize) -> Var {
        let adj = HopAdjacency::build(&HopIndex::build(graph, self.k()));
        let n = graph.node_count;
        let hops: Vec<Rc<Pairs>> = (1..=self.k())
            .map(|i| {
                let e = adj.entries(i);
                Rc::new(Pairs {
                    dst: e.iter().map(|t| t.0 as u32).collect(),
                    src: e.iter().map(|t| t.1 as u32).collect(),
                    weight: Some(e.iter().map(|t| t.2 * self.beta).collect()),
                })
            })
            .collect();
        let mut h = h0;
        for _ in 0..layers {
            let mut terms = Vec::new();
            for (pairs, &w) in hops.iter().zip(&self.hop_weights) {
                let s = pass.tape.neighbor_sum(h, Rc::clone(pairs), n);
                terms.push(pass.tape.scale(s, w));
            }
            let pre = pass.tape.add_all(&terms);
            h = match self.activation {
                Activation::Tanh => pass.tape.tanh(pre),
                Activation::Identity => pre,
            };
        }
        h
    }
}

/// Deterministic positive input states for sensitivity probes.
pub fn probe_input(n: usize, d: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_shape_fn((n, d), |_| rng.gen_range(0.1..1.0))
}

/// Frobenius norm of `d h_u^(T) / d h_v^(0)`, one reverse pass per output
/// coordinate. Models run in evaluation mode, so nodes interact only
/// through message passing.
pub fn empirical_jacobian(
    model: &dyn NodeMap,
    graph: &Graph,
    u: usize,
    v: usize,
    layers: usize,
    h0: &Mat,
) -> f64 {
    let mut pass = Pass::new(model.store(), false, 0);
    let x = pass.tape.leaf(h0.clone());
    let out = model.apply(&mut pass, graph, x, layers);
    let (n, d_out) = pass.tape.shape(out);
    let mut total = 0.0;
    for c in 0..d_out {
        let mut seed = Mat::zeros((n, d_out));
        seed[[u, c]] = 1.0;
        let grads = pass.tape.backward_with(out, seed);
        if let Some(g) = grads.get(x) {
            total += g.row(v).iter().map(|x| x * x).sum::<f64>();
        }
    }
    total.sqrt()
}

/// Nodes `0 .. l*w` of the layered graph; node `level * w` sits at distance
/// `level` from node 0.
pub fn layered_graph(l: usize, w: usize) -> Graph {
    splab_core::prox::gen_structure(l, w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub r: usize,
    pub model: String,
    pub k: usize,
    #[serde(rename = "T")]
    pub layers: usize,
    pub norm: f64,
    pub bound: Option<f64>,
}

/// Settings for [`decay_curve`].
#[derive(Debug, Clone)]
pub struct DecaySettings {
    pub l: usize,
    pub w: usize,
    /// Hop cutoff of the shortest-path family.
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub beta: f64,
}

impl Default for DecaySettings {
    fn default() -> Self {
        Self {
            l: 11,
            w: 5,
            k: 10,
            dim: 8,
            seed: 0,
            beta: 1.0,
        }
    }
}

fn real_model(k: usize, layers: usize, dim: usize, seed: u64) -> Model {
    let mut cfg = ModelConfig::new(ModelKind::Spn, InputEncoding::Colors { count: 1 }, dim, layers, k, 1);
    cfg.pooling = PoolMode::Sum;
    Model::new(cfg, seed).expect("valid probe config")
}

/// Sensitivity of node 0 to a node at each distance `r = 1 .. l-1` on the
/// layered graph: message passing with `T = r` layers against the
/// shortest-path family with `T = ceil(r / k)`, for trained-style layers
/// (`mpnn`, `spn`) and the normalized probe (`probe-mpnn`, `probe-spn`,
/// with bounds).
pub fn decay_curve(s: &DecaySettings) -> Vec<DecayRow> {
    let graph = layered_graph(s.l, s.w);
    let max_r = s.l - 1;
    let mpnn = real_model(1, max_r, s.dim, s.seed);
    let spn = real_model(s.k, max_r.div_ceil(s.k), s.dim, s.seed);
    let probe_mpnn = ProbeModel::new(vec![1.0], s.beta, Activation::Tanh, 1);
    let probe_spn = ProbeModel::new(vec![1.0 / s.k as f64; s.k], s.beta, Activation::Tanh, 1);
    let h_real = probe_input(graph.node_count, s.dim, s.seed);
    let h_probe = probe_input(graph.node_count, 1, s.seed);
    let mut rows = Vec::new();
    for r in 1..=max_r {
        let v = r * s.w;
        let t_spn = r.div_ceil(s.k);
        let mut push = |name: &str, k: usize, t: usize, norm: f64, bound: Option<f64>| {
            rows.push(DecayRow {
                r,
                model: name.to_string(),
                k,
                layers: t,
                norm,
                bound,
            })
        };
        push("mpnn", 1, r, empirical_jacobian(&mpnn, &graph, 0, v, r, &h_real), None);
        push("spn", s.k, t_spn, empirical_jacobian(&spn, &graph, 0, v, t_spn, &h_real), None);
        push(
            "probe-mpnn",
            1,
            r,
            empirical_jacobian(&probe_mpnn, &graph, 0, v, r, &h_probe),
            Some(probe_mpnn.bound(&graph, r, 0, v)),
        );
        push(
            "probe-spn",
            s.k,
            t_spn,
            empirical_jacobian(&probe_spn, &graph, 0, v, t_spn, &h_probe),
            Some(probe_spn.bound(&graph, t_spn, 0, v)),
        );
    }
    rows
}

/// `r,model,k,T,norm,bound` with an empty bound when not applicable.
pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "model", "k", "T", "norm", "bound"]).expect("in-memory write");
    for row in rows {
        w.write_record([
            row.r.to_string(),
            row.model.clone(),
            row.k.to_string(),
            row.layers.to_string(),
            format!("{:e}", row.norm),
            row.bound.map(|b| format!("{b:e}")).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_power() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let adj = HopAdjacency::build(&HopIndex::build(&g, 1));
        assert!((adjacency_power_entry(&adj, 1, 1, 0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn path_under_reaching() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let adj = HopAdjacency::build(&HopIndex::build(&g, 1));
        assert_eq!(adjacency_power_entry(&adj, 1, 1, 0, 2), 0.0);
        assert!(adjacency_power_entry(&adj, 1, 2, 0, 2) > 0.0);
    }

    #[test]
    fn linear_probe_matches_coefficient() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let p = ProbeModel::new(vec![1.0], 0.7, Activation::Identity, 1);
        let h0 = probe_input(3, 1, 0);
        let norm = empirical_jacobian(&p, &g, 0, 2, 2, &h0);
        let adj = HopAdjacency::build(&HopIndex::build(&g, 1));
        let exact = 0.49 * adjacency_power_entry(&adj, 1, 2, 0, 2);
        assert!((norm - exact).abs() < 1e-15, "{norm} vs {exact}");
        assert!((p.bound(&g, 2, 0, 2) - exact).abs() < 1e-15);
    }

    #[test]
    fn csv_header() {
        let rows = vec![DecayRow {
            r: 1,
            model: "spn".into(),
            k: 2,
            layers: 1,
            norm: 0.5,
            bound: None,
        }];
        let text = decay_csv(&rows);
        assert!(text.starts_with("r,model,k,T,norm,bound\n1,spn,2,1,"));
    }
}
