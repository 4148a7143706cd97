//! Color refinement and shortest-path graph statistics.
//!
//! Relabeling always goes through an ordered table built inside the call,
//! so two nodes share a color id iff their refinement histories are equal.
//! Comparisons between graphs refine both graphs against one shared table.

use std::collections::BTreeMap;

use crate::graph::Graph;
use crate::hops::{all_pairs_distances, Distance, HopIndex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub colors: Vec<usize>,
    /// Refinement rounds executed (round 0 recoloring excluded).
    pub round: usize,
    pub stable: bool,
}

impl Coloring {
    pub fn class_count(&self) -> usize {
        let mut c = self.colors.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }
}

/// Assigns dense ids to keys in sorted key order.
fn relabel<K: Ord + Clone>(keys: &[Vec<K>]) -> Vec<Vec<usize>> {
    let mut table: BTreeMap<K, usize> = BTreeMap::new();
    for k in keys.iter().flatten() {
        table.entry(k.clone()).or_insert(0);
    }
    for (i, v) in table.values_mut().enumerate() {
        *v = i;
    }
    keys.iter()
        .map(|row| row.iter().map(|k| table[k]).collect())
        .collect()
}

fn distinct(colors: &[Vec<usize>]) -> usize {
    let mut all: Vec<usize> = colors.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

/// Joint 1-WL refinement from already-relabeled initial colors.
fn refine_joint(
    adjs: &[Vec<Vec<usize>>],
    mut colors: Vec<Vec<usize>>,
    max_rounds: usize,
) -> (Vec<Vec<usize>>, usize, bool) {
    let mut classes = distinct(&colors);
    let mut rounds = 0;
    while rounds < max_rounds {
        let signatures: Vec<Vec<(usize, Vec<usize>)>> = adjs
            .iter()
            .zip(&colors)
            .map(|(adj, col)| {
                adj.iter()
                    .enumerate()
                    .map(|(u, nbrs)| {
                        let mut multiset: Vec<usize> = nbrs.iter().map(|&v| col[v]).collect();
                        multiset.sort_unstable();
                        (col[u], multiset)
                    })
                    .collect()
            })
            .collect();
        colors = relabel(&signatures);
        rounds += 1;
        let next = distinct(&colors);
        if next == classes {
            return (colors, rounds, true);
        }
        classes = next;
    }
    (colors, rounds, false)
}

fn histogram(colors: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &c in colors {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

fn to_coloring(mut joint: (Vec<Vec<usize>>, usize, bool)) -> Coloring {
    Coloring {
        colors: joint.0.remove(0),
        round: joint.1,
        stable: joint.2,
    }
}

/// 1-WL refinement of one graph, starting from its node colors.
pub fn wl_refine(graph: &Graph, max_rounds: usize) -> Coloring {
    let init = relabel(std::slice::from_ref(&graph.colors));
    to_coloring(refine_joint(&[graph.adjacency()], init, max_rounds))
}

/// True iff jointly refined stable color histograms differ.
pub fn wl_distinguish(a: &Graph, b: &Graph) -> bool {
    let init = relabel(&[a.colors.clone(), b.colors.clone()]);
    let rounds = a.node_count + b.node_count;
    let (colors, _, _) = refine_joint(&[a.adjacency(), b.adjacency()], init, rounds);
    histogram(&colors[0]) != histogram(&colors[1])
}

/// Shortest-path statistics of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpFeature {
    /// Multiset of distances over unordered node pairs, infinite included.
    pub pair_histogram: BTreeMap<Distance, usize>,
    /// Per node: counts for distance `1..=n-1` followed by the infinite bin.
    pub node_histograms: Vec<Vec<usize>>,
}

pub fn sp_feature(graph: &Graph) -> SpFeature {
    let n = graph.node_count;
    let dist = all_pairs_distances(graph);
    let mut pair_histogram = BTreeMap::new();
    let mut node_histograms = vec![vec![0; n.max(1)]; n];
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let bin = match dist[u][v] {
                Distance::Finite(d) => d - 1,
                Distance::Infinite => n - 1,
            };
            node_histograms[u][bin] += 1;
            if u < v {
                *pair_histogram.entry(dist[u][v]).or_insert(0) += 1;
            }
        }
    }
    SpFeature {
        pair_histogram,
        node_histograms,
    }
}

/// True iff the unlabeled pair-distance multisets differ.
pub fn sp_distinguish(a: &Graph, b: &Graph) -> bool {
    sp_feature(a).pair_histogram != sp_feature(b).pair_histogram
}

/// Sum of distances over unordered connected pairs; `None` when the graph
/// is disconnected.
pub fn wiener_index(graph: &Graph) -> Option<u64> {
    let dist = all_pairs_distances(graph);
    let mut total = 0u64;
    for (u, row) in dist.iter().enumerate() {
        for d in &row[u + 1..] {
            total += d.finite()? as u64;
        }
    }
    Some(total)
}

fn sp_initial(graph: &Graph, k: usize) -> Vec<(usize, Vec<usize>)> {
    let idx = HopIndex::build(graph, k);
    (0..graph.node_count)
        .map(|u| {
            let mut sizes = idx.shell_sizes(u);
            sizes.push(idx.infinity_set(u).len());
            (graph.colors[u], sizes)
        })
        .collect()
}

/// Round 0 recolors each node by `(color, |N_1|, .., |N_k|, |N_inf|)`, then
/// 1-WL refinement follows.
pub fn sp_wl_refine(graph: &Graph, k: usize) -> Coloring {
    let init = relabel(&[sp_initial(graph, k)]);
    let rounds = graph.node_count;
    to_coloring(refine_joint(&[graph.adjacency()], init, rounds))
}

pub fn sp_wl_distinguish(a: &Graph, b: &Graph, k: usize) -> bool {
    let init = relabel(&[sp_initial(a, k), sp_initial(b, k)]);
    let rounds = a.node_count + b.node_count;
    let (colors, _, _) = refine_joint(&[a.adjacency(), b.adjacency()], init, rounds);
    histogram(&colors[0]) != histogram(&colors[1])
}
