//! Message passing layers and their weights.
//!
//! Node states are `n x d` row matrices. Every layer reads its sparse
//! structure from a [`Batch`].

use std::rc::Rc;

use rand::Rng;

use crate::batch::Batch;
use crate::params::{fan_in_uniform, BufferId, ParamId, ParamStore, Pass};
use crate::tape::{BatchStats, Mat, Var};

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), fan_in_uniform(rng, d_in, d_out, d_in));
        let bias = bias.then(|| store.add(format!("{name}.bias"), fan_in_uniform(rng, 1, d_out, d_in)));
        Self { weight, bias }
    }

    pub fn forward(&self, pass: &mut Pass, x: Var) -> Var {
        let w = pass.param(self.weight);
        let y = pass.tape.matmul(x, w);
        match self.bias {
            Some(b) => {
                let b = pass.param(b);
                pass.tape.add_row(y, b)
            }
            None => y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Mat::ones((1, d))),
            beta: store.add(format!("{name}.beta"), Mat::zeros((1, d))),
            running_mean: store.add_buffer(format!("{name}.running_mean"), Mat::zeros((1, d))),
            running_var: store.add_buffer(format!("{name}.running_var"), Mat::ones((1, d))),
        }
    }

    /// Batch statistics in training, running statistics otherwise.
    pub fn forward(&self, pass: &mut Pass, x: Var) -> Var {
        let gamma = pass.param(self.gamma);
        let beta = pass.param(self.beta);
        if pass.training {
            let (y, stats) = pass.tape.batch_norm(x, gamma, beta, None, BN_EPS);
            pass.record_bn(self.running_mean, self.running_var, stats.expect("batch stats"));
            y
        } else {
            let store = pass.store();
            let running = BatchStats {
                mean: store.buffer(self.running_mean).iter().copied().collect(),
                var: store.buffer(self.running_var).iter().copied().collect(),
            };
            pass.tape.batch_norm(x, gamma, beta, Some(&running), BN_EPS).0
        }
    }
}

/// Two `Linear -> BatchNorm -> ReLU` blocks, or the identity map.
#[derive(Debug, Clone, PartialEq)]
pub enum Mlp {
    Identity,
    TwoLayer([(Linear, BatchNorm); 2]),
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, d_in: usize, d: usize) -> Self {
        let block = |store: &mut ParamStore, rng: &mut R, i: usize, d_in: usize| {
            (
                Linear::new(store, rng, &format!("{name}.lin{i}"), d_in, d, true),
                BatchNorm::new(store, &format!("{name}.bn{i}"), d),
            )
        };
        let first = block(store, rng, 0, d_in);
        let second = block(store, rng, 1, d);
        Mlp::TwoLayer([first, second])
    }

    pub fn forward(&self, pass: &mut Pass, x: Var) -> Var {
        match self {
            Mlp::Identity => x,
            Mlp::TwoLayer(blocks) => {
                let mut h = x;
                for (lin, bn) in blocks {
                    h = lin.forward(pass, h);
                    h = bn.forward(pass, h);
                    h = pass.tape.relu(h);
                }
                h
            }
        }
    }
}

fn hop_pairs(batch: &Batch, k: usize) -> &[Rc<crate::tape::Pairs>] {
    assert!(
        batch.hops.len() >= k,
        "batch carries {} hop shells, layer needs {k}",
        batch.hops.len()
    );
    &batch.hops[..k]
}

/// `h + eps * h`.
fn one_plus_eps(pass: &mut Pass, h: Var, eps: ParamId) -> Var {
    let e = pass.param(eps);
    let scaled = pass.tape.scale_by(h, e, 0);
    pass.tape.add(h, scaled)
}

/// Hop weights on the simplex.
pub fn hop_weights(pass: &mut Pass, logits: ParamId) -> Var {
    let l = pass.param(logits);
    pass.tape.softmax_rows(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpnLayerWeights {
    pub eps: ParamId,
    pub alpha_logits: ParamId,
    pub mlp: Mlp,
    pub k: usize,
}

impl SpnLayerWeights {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, k: usize, d: usize) -> Self {
        Self {
            eps: store.add(format!("{name}.eps"), Mat::zeros((1, 1))),
            alpha_logits: store.add(format!("{name}.alpha_logits"), Mat::zeros((1, k))),
            mlp: Mlp::new(store, rng, &format!("{name}.mlp"), d, d),
            k,
        }
    }
}

/// Input of the SPN MLP: `(1 + eps) h_u + sum_i alpha_i sum_{v in N_i(u)} h_v`.
pub fn spn_aggregate(pass: &mut Pass, h: Var, batch: &Batch, w: &SpnLayerWeights) -> Var {
    let alpha = hop_weights(pass, w.alpha_logits);
    let mut acc = one_plus_eps(pass, h, w.eps);
    for (i, pairs) in hop_pairs(batch, w.k).iter().enumerate() {
        let s = pass.tape.neighbor_sum(h, Rc::clone(pairs), batch.n_nodes);
        let s = pass.tape.scale_by(s, alpha, i);
        acc = pass.tape.add(acc, s);
    }
    acc
}

pub fn spn_layer(pass: &mut Pass, h: Var, batch: &Batch, w: &SpnLayerWeights) -> Var {
    let agg = spn_aggregate(pass, h, batch, w);
    w.mlp.forward(pass, agg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GinLayerWeights {
    pub eps: ParamId,
    pub mlp: Mlp,
}

impl GinLayerWeights {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, d: usize) -> Self {
        Self {
            eps: store.add(format!("{name}.eps"), Mat::zeros((1, 1))),
            mlp: Mlp::new(store, rng, &format!("{name}.mlp"), d, d),
        }
    }
}

/// `MLP((1 + eps) h_u + sum_{v in N(u)} h_v)` over direct edges.
pub fn gin_layer(pass: &mut Pass, h: Var, batch: &Batch, w: &GinLayerWeights) -> Var {
    let acc = one_plus_eps(pass, h, w.eps);
    let s = pass.tape.neighbor_sum(h, Rc::clone(&hop_pairs(batch, 1)[0]), batch.n_nodes);
    let agg = pass.tape.add(acc, s);
    w.mlp.forward(pass, agg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RspnLayerWeights {
    pub eps: ParamId,
    pub alpha_logits: ParamId,
    pub mlp_self: Mlp,
    pub mlp_relations: Vec<Mlp>,
    pub mlp_hops: Mlp,
    pub k: usize,
}

impl RspnLayerWeights {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        k: usize,
        relations: usize,
        d: usize,
    ) -> Self {
        Self {
            eps: store.add(format!("{name}.eps"), Mat::zeros((1, 1))),
            alpha_logits: store.add(format!("{name}.alpha_logits"), Mat::zeros((1, k))),
            mlp_self: Mlp::new(store, rng, &format!("{name}.mlp_self"), d, d),
            mlp_relations: (0..relations)
                .map(|j| Mlp::new(store, rng, &format!("{name}.mlp_rel{j}"), d, d))
                .collect(),
            mlp_hops: Mlp::new(store, rng, &format!("{name}.mlp_hops"), d, d),
            k,
        }
    }
}

/// `(1 + eps) MLP_s(h_u) + alpha_1 sum_j sum_{r_j(u, v)} MLP_j(h_v)
///  + sum_{i >= 2} alpha_i sum_{v in N_i(u)} MLP_h(h_v)`.
pub fn rspn_layer(pass: &mut Pass, h: Var, batch: &Batch, w: &RspnLayerWeights) -> Var {
    assert!(
        batch.relations.len() >= w.mlp_relations.len(),
        "batch carries {} relations, layer needs {}",
        batch.relations.len(),
        w.mlp_relations.len()
    );
    let alpha = hop_weights(pass, w.alpha_logits);
    let own = w.mlp_self.forward(pass, h);
    let mut acc = one_plus_eps(pass, own, w.eps);
    let mut direct = Vec::new();
    for (mlp, pairs) in w.mlp_relations.iter().zip(&batch.relations) {
        let m = mlp.forward(pass, h);
        direct.push(pass.tape.neighbor_sum(m, Rc::clone(pairs), batch.n_nodes));
    }
    if !direct.is_empty() {
        let s = pass.tape.add_all(&direct);
        let s = pass.tape.scale_by(s, alpha, 0);
        acc = pass.tape.add(acc, s);
    }
    if w.k >= 2 {
        let m = w.mlp_hops.forward(pass, h);
        for (i, pairs) in hop_pairs(batch, w.k).iter().enumerate().skip(1) {
            let s = pass.tape.neighbor_sum(m, Rc::clone(pairs), batch.n_nodes);
            let s = pass.tape.scale_by(s, alpha, i);
            acc = pass.tape.add(acc, s);
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphormerLayerWeights {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    /// `1 x (max_distance + 1)`.
    pub distance_bias: ParamId,
    pub bn: BatchNorm,
    pub max_distance: usize,
}

impl GraphormerLayerWeights {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d: usize,
        max_distance: usize,
    ) -> Self {
        Self {
            query: Linear::new(store, rng, &format!("{name}.query"), d, d, false),
            key: Linear::new(store, rng, &format!("{name}.key"), d, d, false),
            value: Linear::new(store, rng, &format!("{name}.value"), d, d, false),
            output: Linear::new(store, rng, &format!("{name}.output"), d, d, true),
            distance_bias: store.add(format!("{name}.distance_bias"), Mat::zeros((1, max_distance + 1))),
            bn: BatchNorm::new(store, &format!("{name}.bn"), d),
            max_distance,
        }
    }
}

/// Bias table index for a distance: `min(d, M)`, unreachable pairs read `M`.
pub fn distance_bucket(d: u32, max_distance: usize) -> u32 {
    if d == u32::MAX {
        max_distance as u32
    } else {
        d.min(max_distance as u32)
    }
}

/// Single-head attention within each graph: scaled dot-product scores plus
/// the distance bias, softmax over all nodes of the graph, applied to the
/// value projections.
pub fn graphormer_attention(pass: &mut Pass, h: Var, batch: &Batch, w: &GraphormerLayerWeights) -> Var {
    assert_eq!(
        batch.distances.len(),
        batch.n_graphs,
        "graphormer needs per-graph distance tables"
    );
    let d = pass.tape.shape(h).1;
    let q = w.query.forward(pass, h);
    let k = w.key.forward(pass, h);
    let v = w.value.forward(pass, h);
    let bias = pass.param(w.distance_bias);
    let scale = 1.0 / (d as f64).sqrt();
    let mut outs = Vec::with_capacity(batch.n_graphs);
    for g in 0..batch.n_graphs {
        let (off, n) = (batch.offsets[g], batch.sizes[g]);
        let qg = pass.tape.slice_rows(q, off, n);
        let kg = pass.tape.slice_rows(k, off, n);
        let vg = pass.tape.slice_rows(v, off, n);
        let kt = pass.tape.transpose(kg);
        let scores = pass.tape.matmul(qg, kt);
        let scores = pass.tape.scale(scores, scale);
        let idx: Vec<u32> = batch.distances[g]
            .iter()
            .map(|&dist| distance_bucket(dist, w.max_distance))
            .collect();
        let b = pass.tape.gather_scalar(bias, Rc::new(idx), n, n);
        let scores = pass.tape.add(scores, b);
        let att = pass.tape.softmax_rows(scores);
        outs.push(pass.tape.matmul(att, vg));
    }
    pass.tape.concat_rows(&outs)
}

/// `ReLU(BN(h + attention(h) W_o + b_o))`.
pub fn graphormer_lite_layer(pass: &mut Pass, h: Var, batch: &Batch, w: &GraphormerLayerWeights) -> Var {
    let att = graphormer_attention(pass, h, batch, w);
    let proj = w.output.forward(pass, att);
    let res = pass.tape.add(h, proj);
    let y = w.bn.forward(pass, res);
    pass.tape.relu(y)
}

/// Degree embedding table, `(max_degree + 1) x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Centrality {
    pub table: ParamId,
    pub max_degree: usize,
}

impl Centrality {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, max_degree: usize, d: usize) -> Self {
        Self {
            table: store.add(format!("{name}.table"), fan_in_uniform(rng, max_degree + 1, d, d)),
            max_degree,
        }
    }
}

/// `h_u + Z[min(deg(u), max_degree)]`.
pub fn centrality_encode(pass: &mut Pass, h: Var, degrees: &[usize], c: &Centrality) -> Var {
    let idx: Vec<u32> = degrees.iter().map(|&d| d.min(c.max_degree) as u32).collect();
    let z = pass.param(c.table);
    let rows = pass.tape.gather(z, Rc::new(idx));
    pass.tape.add(h, rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayerWeights {
    pub linear: Linear,
    pub bn: BatchNorm,
}

impl GcnLayerWeights {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, d: usize) -> Self {
        Self {
            linear: Linear::new(store, rng, &format!("{name}.linear"), d, d, true),
            bn: BatchNorm::new(store, &format!("{name}.bn"), d),
        }
    }
}

/// `ReLU(BN(A_hat h W + b))` with the self-looped normalized adjacency.
pub fn gcn_layer(pass: &mut Pass, h: Var, batch: &Batch, w: &GcnLayerWeights) -> Var {
    let pairs = Rc::clone(batch.gcn.as_ref().expect("batch built without gcn structure"));
    let weight = pass.param(w.linear.weight);
    let x = pass.tape.matmul(h, weight);
    let mut y = pass.tape.neighbor_sum(x, pairs, batch.n_nodes);
    if let Some(b) = w.linear.bias {
        let b = pass.param(b);
        y = pass.tape.add_row(y, b);
    }
    let y = w.bn.forward(pass, y);
    pass.tape.relu(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayerWeights {
    pub linear: Linear,
    /// `d x 1` attention vectors for the receiving and sending node.
    pub att_dst: ParamId,
    pub att_src: ParamId,
    pub bias: ParamId,
    pub bn: BatchNorm,
}

pub const GAT_SLOPE: f64 = 0.2;

impl GatLayerWeights {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, d: usize) -> Self {
        Self {
            linear: Linear::new(store, rng, &format!("{name}.linear"), d, d, false),
            att_dst: store.add(format!("{name}.att_dst"), fan_in_uniform(rng, d, 1, d)),
            att_src: store.add(format!("{name}.att_src"), fan_in_uniform(rng, d, 1, d)),
            bias: store.add(format!("{name}.bias"), Mat::zeros((1, d))),
            bn: BatchNorm::new(store, &format!("{name}.bn"), d),
        }
    }
}

/// Single-head attention over `N(u) + {u}`:
/// `e_uv = LeakyReLU(a_dst . W h_u + a_src . W h_v)`, normalized per `u`.
pub fn gat_layer(pass: &mut Pass, h: Var, batch: &Batch, w: &GatLayerWeights) -> Var {
    let pairs = Rc::clone(batch.gat.as_ref().expect("batch built without gat structure"));
    let x = w.linear.forward(pass, h);
    let ad = pass.param(w.att_dst);
    let asrc = pass.param(w.att_src);
    let sd = pass.tape.matmul(x, ad);
    let ss = pass.tape.matmul(x, asrc);
    let dst: Rc<Vec<u32>> = Rc::new(pairs.dst.clone());
    let src: Rc<Vec<u32>> = Rc::new(pairs.src.clone());
    let ed = pass.tape.gather(sd, Rc::clone(&dst));
    let es = pass.tape.gather(ss, src);
    let e = pass.tape.add(ed, es);
    let e = pass.tape.leaky_relu(e, GAT_SLOPE);
    let att = pass.tape.segment_softmax(e, dst, batch.n_nodes);
    let y = pass.tape.edge_weighted_sum(x, att, pairs, batch.n_nodes);
    let b = pass.param(w.bias);
    let y = pass.tape.add_row(y, b);
    let y = w.bn.forward(pass, y);
    pass.tape.relu(y)
}
