//! Random graph strategies shared by the integration tests.

#![allow(dead_code)]

use proptest::prelude::*;
use splab_core::{Edge, Graph};

/// Simple undirected graph with `n` in `1..=max_n`, edge density up to 1/2
/// and colors below `colors`.
pub fn graph(max_n: usize, colors: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(move |n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        (
            proptest::collection::vec(prop::bool::weighted(0.35), m),
            proptest::collection::vec(0..colors.max(1), n),
        )
            .prop_map(move |(mask, cols)| {
                let edges: Vec<Edge> = pairs
                    .iter()
                    .zip(&mask)
                    .filter(|(_, &keep)| keep)
                    .map(|(&(u, v), _)| Edge::new(u, v))
                    .collect();
                Graph::new(n, edges, cols).expect("simple graph")
            })
    })
}

/// A graph together with a permutation of its nodes.
pub fn graph_and_perm(max_n: usize, colors: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    graph(max_n, colors).prop_flat_map(|g| {
        let n = g.node_count;
        (Just(g), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    })
}
