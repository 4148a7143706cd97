//! Shared helpers: seeded random graphs and a finite-difference check over
//! parameters and inputs together.

#![allow(dead_code)]

use std::rc::Rc;

use rand::Rng;
use splab_core::{Edge, Graph};
use splab_nn::{Mat, ParamStore, Pass, Var};

pub const ALL_KINDS: [&str; 6] = [
    "spn",
    "rspn",
    "graphormer-lite",
    "gin-baseline",
    "gcn-baseline",
    "gat-baseline",
];

/// Random simple graph with `n` nodes, edge probability `p`, colors below
/// `colors` and relation ids below `relations`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64, colors: usize, relations: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push(Edge::typed(u, v, rng.gen_range(0..relations.max(1))));
            }
        }
    }
    let cols = (0..n).map(|_| rng.gen_range(0..colors.max(1))).collect();
    Graph::new(n, edges, cols).expect("simple graph")
}

pub fn random_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// Scalar `sum(out * weights)` with fixed pseudo-random weights, so every
/// output entry reaches the gradient.
fn contract(pass: &mut Pass, out: Var) -> Var {
    let (r, c) = pass.tape.shape(out);
    let w = Mat::from_shape_fn((r, c), |(i, j)| 0.3 + ((i * 7 + j * 13) % 11) as f64 / 11.0);
    let y = pass.tape.mul_const(out, Rc::new(w));
    pass.tape.sum_all(y)
}

fn evaluate<F>(store: &ParamStore, input: &Mat, f: &F) -> (f64, Mat, Vec<Mat>)
where
    F: Fn(&mut Pass, Var) -> Var,
{
    let mut pass = Pass::new(store, true, 0);
    let x = pass.tape.leaf(input.clone());
    let out = f(&mut pass, x);
    let loss = contract(&mut pass, out);
    let grads = pass.tape.backward(loss);
    let gx = grads.get_or_zeros(x, input.dim());
    (pass.tape.scalar(loss), gx, pass.param_grads(&grads))
}

/// Largest `|analytic - numeric| / max(1, |analytic|)` over every input and
/// parameter coordinate, central differences with step `1e-6`.
pub fn fd_check<F>(store: &mut ParamStore, input: &Mat, f: F) -> f64
where
    F: Fn(&mut Pass, Var) -> Var,
{
    const H: f64 = 1e-6;
    let (_, gx, gp) = evaluate(store, input, &f);
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(1.0);
    let mut worst = 0.0f64;
    let mut probe = input.clone();
    for ((r, c), &orig) in input.indexed_iter() {
        probe[[r, c]] = orig + H;
        let plus = evaluate(store, &probe, &f).0;
        probe[[r, c]] = orig - H;
        let minus = evaluate(store, &probe, &f).0;
        probe[[r, c]] = orig;
        worst = worst.max(rel(gx[[r, c]], (plus - minus) / (2.0 * H)));
    }
    let names: Vec<String> = store.named().map(|(n, _)| n.to_string()).collect();
    for (i, name) in names.iter().enumerate() {
        let id = store.id_of(name).expect("named parameter");
        let dim = store.get(id).dim();
        for r in 0..dim.0 {
            for c in 0..dim.1 {
                let orig = store.get(id)[[r, c]];
                store.get_mut(id)[[r, c]] = orig + H;
                let plus = evaluate(store, input, &f).0;
                store.get_mut(id)[[r, c]] = orig - H;
                let minus = evaluate(store, input, &f).0;
                store.get_mut(id)[[r, c]] = orig;
                worst = worst.max(rel(gp[i][[r, c]], (plus - minus) / (2.0 * H)));
            }
        }
    }
    worst
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
