//! Compiles node classifiers into the weights of a homogeneous
//! shortest-path message passing layer with global readout:
//!
//! `h'_u = f(h_u C + sum_i (sum_{v in N_i(u)} h_v) A_i + (sum_{v in V} h_v) R + b)`
//!
//! with `f(x) = min(max(x, 0), 1)` and row-vector states, so `C[k][l]` routes
//! subformula `k` into subformula `l`.

use thiserror::Error;

use super::ast::{Formula, FormulaAst, ModalKind};
use crate::graph::Graph;
use crate::hops::HopIndex;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("unsupported modal parameter `{0}`")]
    UnsupportedParam(String),
    #[error("hop predicate e{index} exceeds k = {k}")]
    HopOutOfRange { index: usize, k: usize },
}

/// Construction used for the always-empty parameter `e_i & !e_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyParamPolicy {
    /// No weights at all: the modality is false everywhere.
    #[default]
    Empty,
    /// Reuse the `e_i | !e_i` construction (`R = 1`, `b = -N + 1`), which
    /// counts every node.
    AllNodes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledClassifier {
    pub dim: usize,
    pub k: usize,
    /// `L x L`.
    pub c: Vec<Vec<f64>>,
    /// `k` matrices, `a[i - 1]` for hop `i`.
    pub a: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub quantifier_depth: usize,
    /// Number of layer applications performed by [`run_compiled`].
    pub layers: usize,
    /// Dimension holding the root formula.
    pub output: usize,
    /// Per dimension: the color that initializes it to 1, if it is an atom.
    pub atom_colors: Vec<Option<usize>>,
    /// Per dimension: whether it is `True`.
    pub truth: Vec<bool>,
}

impl CompiledClassifier {
    fn zeros(dim: usize, k: usize) -> Self {
        let m = || vec![vec![0.0; dim]; dim];
        Self {
            dim,
            k,
            c: m(),
            a: (0..k).map(|_| m()).collect(),
            r: m(),
            b: vec![0.0; dim],
            quantifier_depth: 0,
            layers: 0,
            output: 0,
            atom_colors: vec![None; dim],
            truth: vec![false; dim],
        }
    }

    /// One-hot atom encoding of a node color, with `True` dimensions set.
    pub fn initial_state(&self, color: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|l| {
                if self.truth[l] || self.atom_colors[l] == Some(color) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn compile(ast: &FormulaAst, k: usize) -> Result<CompiledClassifier, CompileError> {
    compile_with(ast, k, EmptyParamPolicy::default())
}

pub fn compile_with(
    ast: &FormulaAst,
    k: usize,
    policy: EmptyParamPolicy,
) -> Result<CompiledClassifier, CompileError> {
    let dim = ast.len();
    let mut out = CompiledClassifier::zeros(dim, k);
    let pos = |f: &Formula| ast.position(f).expect("subformula is indexed");
    let hop = |i: usize| {
        if (1..=k).contains(&i) {
            Ok(i - 1)
        } else {
            Err(CompileError::HopOutOfRange { index: i, k })
        }
    };
    for (l, f) in ast.subformulas().iter().enumerate() {
        match f {
            Formula::True => {
                out.truth[l] = true;
                out.b[l] = 1.0;
            }
            Formula::Atom { color, .. } => {
                out.atom_colors[l] = Some(*color);
                out.c[l][l] = 1.0;
            }
            Formula::Not(g) => {
                out.c[pos(g)][l] = -1.0;
                out.b[l] = 1.0;
            }
            Formula::And(x, y) => {
                let (p, q) = (pos(x), pos(y));
                out.c[p][l] = 1.0;
                out.c[q][l] = 1.0;
                out.b[l] = if p == q { 0.0 } else { -1.0 };
            }
            Formula::Or(x, y) => {
                out.c[pos(x)][l] = 1.0;
                out.c[pos(y)][l] = 1.0;
            }
            Formula::Modal { param, count, body } => {
                let kind = param
                    .kind()
                    .ok_or_else(|| CompileError::UnsupportedParam(param.to_string()))?;
                let src = pos(body);
                let threshold = 1.0 - *count as f64;
                match kind {
                    ModalKind::Id => {
                        if *count == 1 {
                            out.c[src][l] = 1.0;
                        }
                    }
                    ModalKind::Edge(i) => {
                        out.a[hop(i)?][src][l] = 1.0;
                        out.b[l] = threshold;
                    }
                    ModalKind::NeitherEdgeNorId(i) => {
                        out.r[src][l] = 1.0;
                        out.c[src][l] = -1.0;
                        out.a[hop(i)?][src][l] = -1.0;
                        out.b[l] = threshold;
                    }
                    ModalKind::IdOrEdge(i) => {
                        out.c[src][l] = 1.0;
                        out.a[hop(i)?][src][l] = 1.0;
                        out.b[l] = threshold;
                    }
                    ModalKind::NotId => {
                        out.r[src][l] = 1.0;
                        out.c[src][l] = -1.0;
                        out.b[l] = threshold;
                    }
                    ModalKind::NotEdge(i) => {
                        out.r[src][l] = 1.0;
                        out.a[hop(i)?][src][l] = -1.0;
                        out.b[l] = threshold;
                    }
                    ModalKind::All(i) => {
                        hop(i)?;
                        out.r[src][l] = 1.0;
                        out.b[l] = threshold;
                    }
                    ModalKind::Empty(i) => {
                        hop(i)?;
                        if policy == EmptyParamPolicy::AllNodes {
                            out.r[src][l] = 1.0;
                            out.b[l] = threshold;
                        }
                    }
                }
            }
        }
    }
    out.quantifier_depth = ast.quantifier_depth();
    // A subformula of height t is exact after t applications; extra
    // applications leave exact values unchanged.
    out.layers = ast.root().height().max(out.quantifier_depth + 1);
    out.output = ast.root_position();
    Ok(out)
}

fn truncated_relu(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Applies the compiled layer `layers` times; returns every state, the
/// initial one included.
pub fn run_compiled_trace(
    cc: &CompiledClassifier,
    graph: &Graph,
    index: &HopIndex,
) -> Vec<Vec<Vec<f64>>> {
    let n = graph.node_count;
    let dim = cc.dim;
    let used_hops: Vec<usize> = (0..cc.k)
        .filter(|&i| cc.a[i].iter().flatten().any(|&x| x != 0.0))
        .collect();
    if let Some(&top) = used_hops.last() {
        assert!(top < index.k(), "hop index has k = {}, need {}", index.k(), top + 1);
    }
    let mut h: Vec<Vec<f64>> = graph.colors.iter().map(|&c| cc.initial_state(c)).collect();
    let mut trace = vec![h.clone()];
    for _ in 0..cc.layers {
        let mut total = vec![0.0; dim];
        for row in &h {
            for (t, x) in total.iter_mut().zip(row) {
                *t += x;
            }
        }
        let mut next = vec![vec![0.0; dim]; n];
        for u in 0..n {
            let mut pre = cc.b.clone();
            accumulate(&mut pre, &h[u], &cc.c);
            accumulate(&mut pre, &total, &cc.r);
            for &i in &used_hops {
                let mut agg = vec![0.0; dim];
                for &v in index.shell(u, i + 1) {
                    for (s, x) in agg.iter_mut().zip(&h[v]) {
                        *s += x;
                    }
                }
                accumulate(&mut pre, &agg, &cc.a[i]);
            }
            next[u] = pre.into_iter().map(truncated_relu).collect();
        }
        h = next;
        trace.push(h.clone());
    }
    trace
}

/// `out += row * m` for a row vector.
fn accumulate(out: &mut [f64], row: &[f64], m: &[Vec<f64>]) {
    for (k, &x) in row.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(&m[k]) {
            *o += x * w;
        }
    }
}

/// Per-node truth of the root formula.
pub fn run_compiled(cc: &CompiledClassifier, graph: &Graph, index: &HopIndex) -> Vec<bool> {
    let trace = run_compiled_trace(cc, graph, index);
    trace
        .last()
        .expect("trace holds the initial state")
        .iter()
        .map(|row| row[cc.output] > 0.5)
        .collect()
}
