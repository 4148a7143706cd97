//! Shortest-path hop decomposition.
//!
//! For every node `u` the index holds the exact shortest-path shells
//! `N_1(u) .. N_k(u)` and the set of unreachable nodes `N_inf(u)`. Nodes
//! reachable at distance `> k` belong to no bucket. One BFS per source.

use std::collections::VecDeque;
use std::fmt;

use crate::graph::Graph;

/// Shortest-path length, with an explicit unreachable value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Distance::Infinite)
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => write!(f, "inf"),
        }
    }
}

/// BFS distances from `source` over sorted adjacency lists.
pub fn bfs_distances(adj: &[Vec<usize>], source: usize) -> Vec<Distance> {
    let mut dist = vec![Distance::Infinite; adj.len()];
    dist[source] = Distance::Finite(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let Distance::Finite(du) = dist[u] else { unreachable!() };
        for &v in &adj[u] {
            if dist[v].is_infinite() {
                dist[v] = Distance::Finite(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs shortest-path lengths via one BFS per node.
pub fn all_pairs_distances(graph: &Graph) -> Vec<Vec<Distance>> {
    let adj = graph.adjacency();
    (0..graph.node_count).map(|s| bfs_distances(&adj, s)).collect()
}

/// Largest finite distance, or infinite if the graph is disconnected.
pub fn diameter(graph: &Graph) -> Distance {
    let mut best = 0;
    for row in all_pairs_distances(graph) {
        for d in row {
            match d {
                Distance::Finite(d) => best = best.max(d),
                Distance::Infinite => return Distance::Infinite,
            }
        }
    }
    Distance::Finite(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopIndex {
    k: usize,
    /// `shells[u][i - 1]` is `N_i(u)`, sorted.
    shells: Vec<Vec<Vec<usize>>>,
    infinity: Vec<Vec<usize>>,
    distances: Option<Vec<Vec<Distance>>>,
}

impl HopIndex {
    /// Builds the index without retaining the full distance table.
    pub fn build(graph: &Graph, k: usize) -> Self {
        Self::build_inner(graph, k, false)
    }

    /// Builds the index and keeps the `n x n` distance table.
    pub fn build_with_distances(graph: &Graph, k: usize) -> Self {
        Self::build_inner(graph, k, true)
    }

    fn build_inner(graph: &Graph, k: usize, keep: bool) -> Self {
        assert!(k >= 1, "hop cutoff k must be at least 1");
        let n = graph.node_count;
        let adj = graph.adjacency();
        let mut shells = Vec::with_capacity(n);
        let mut infinity = Vec::with_capacity(n);
        let mut table = keep.then(|| Vec::with_capacity(n));
        for u in 0..n {
            let dist = bfs_distances(&adj, u);
            let mut hops = vec![Vec::new(); k];
            let mut inf = Vec::new();
            // Ascending v keeps every bucket sorted.
            for (v, d) in dist.iter().enumerate() {
                match *d {
                    Distance::Finite(0) => {}
                    Distance::Finite(d) if d <= k => hops[d - 1].push(v),
                    Distance::Finite(_) => {}
                    Distance::Infinite => inf.push(v),
                }
            }
            shells.push(hops);
            infinity.push(inf);
            if let Some(t) = table.as_mut() {
                t.push(dist);
            }
        }
        Self {
            k,
            shells,
            infinity,
            distances: table,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.shells.len()
    }

    /// `N_hop(u)` for `hop` in `1..=k`.
    pub fn shell(&self, u: usize, hop: usize) -> &[usize] {
        assert!((1..=self.k).contains(&hop), "hop {hop} outside 1..={}", self.k);
        &self.shells[u][hop - 1]
    }

    pub fn infinity_set(&self, u: usize) -> &[usize] {
        &self.infinity[u]
    }

    /// Shell sizes `(|N_1(u)|, .., |N_k(u)|)`.
    pub fn shell_sizes(&self, u: usize) -> Vec<usize> {
        self.shells[u].iter().map(Vec::len).collect()
    }

    pub fn distances(&self) -> Option<&[Vec<Distance>]> {
        self.distances.as_deref()
    }

    /// All ordered `(u, v)` pairs with `v` in `N_hop(u)`, by ascending `u`.
    pub fn pairs(&self, hop: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.node_count() {
            for &v in self.shell(u, hop) {
                out.push((u, v));
            }
        }
        out
    }

    /// Histogram of shell sizes: `counts[i - 1]` sums `|N_i(u)|` over all u.
    pub fn hop_histogram(&self) -> Vec<usize> {
        (1..=self.k)
            .map(|i| (0..self.node_count()).map(|u| self.shell(u, i).len()).sum())
            .collect()
    }
}

/// Normalized per-hop adjacency `D_i^{-1/2} (A_i + I) D_i^{-1/2}`, stored as
/// sorted coordinate lists.
#[derive(Debug, Clone, PartialEq)]
pub struct HopAdjacency {
    n: usize,
    /// Row sums of `A_i + I`, per hop.
    degrees: Vec<Vec<usize>>,
    entries: Vec<Vec<(usize, usize, f64)>>,
}

impl HopAdjacency {
    pub fn build(index: &HopIndex) -> Self {
        let n = index.node_count();
        let mut degrees = Vec::with_capacity(index.k());
        let mut entries = Vec::with_capacity(index.k());
        for hop in 1..=index.k() {
            let deg: Vec<usize> = (0..n).map(|u| index.shell(u, hop).len() + 1).collect();
            let mut coo = Vec::new();
            for u in 0..n {
                let mut cols: Vec<usize> = index.shell(u, hop).to_vec();
                cols.push(u);
                cols.sort_unstable();
                for v in cols {
                    let w = 1.0 / ((deg[u] * deg[v]) as f64).sqrt();
                    coo.push((u, v, w));
                }
            }
            degrees.push(deg);
            entries.push(coo);
        }
        Self { n, degrees, entries }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    /// Row sums of `A_hop + I`.
    pub fn degrees(&self, hop: usize) -> &[usize] {
        &self.degrees[hop - 1]
    }

    /// Nonzero entries `(row, col, value)` of the normalized matrix, row-major.
    pub fn entries(&self, hop: usize) -> &[(usize, usize, f64)] {
        &self.entries[hop - 1]
    }

    pub fn dense(&self, hop: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for &(u, v, w) in self.entries(hop) {
            m[u][v] = w;
        }
        m
    }
}
