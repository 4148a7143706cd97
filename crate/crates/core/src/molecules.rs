//! Synthetic molecule-like regression graphs: sparse trees with a few ring
//! closures, five atom types (node colors) and four bond types (edge
//! relations). The target mixes pairwise atom-type interactions up to three
//! hops with bond-type counts, standardized over the dataset.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Dataset, Edge, Graph, GraphLabel, Task};
use crate::hops::{all_pairs_distances, Distance};

pub const ATOM_TYPES: usize = 5;
pub const BOND_TYPES: usize = 4;
const AROMATIC: usize = 3;
const MAX_VALENCE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub graphs: usize,
    /// Inclusive atom count range.
    pub atoms: (usize, usize),
    pub max_rings: usize,
    pub seed: u64,
}

impl MoleculeSpec {
    pub fn new(graphs: usize, seed: u64) -> Self {
        Self {
            graphs,
            atoms: (10, 26),
            max_rings: 3,
            seed,
        }
    }
}

fn interaction(a: usize, b: usize) -> f64 {
    const W: [[f64; ATOM_TYPES]; ATOM_TYPES] = [
        [0.2, 0.9, -0.4, 0.5, 0.1],
        [0.9, -0.6, 0.3, 0.0, 0.7],
        [-0.4, 0.3, 0.8, -0.2, 0.4],
        [0.5, 0.0, -0.2, -0.5, 0.6],
        [0.1, 0.7, 0.4, 0.6, -0.3],
    ];
    W[a][b]
}

fn raw_target(g: &Graph) -> f64 {
    let dist = all_pairs_distances(g);
    let mut t = 0.0;
    for u in 0..g.node_count {
        for v in u + 1..g.node_count {
            if let Distance::Finite(d) = dist[u][v] {
                if d <= 3 {
                    t += interaction(g.colors[u], g.colors[v]) / d as f64;
                }
            }
        }
    }
    const BOND: [f64; BOND_TYPES] = [0.0, 0.5, 1.0, -0.3];
    for e in &g.edges {
        t += BOND[e.relation.unwrap_or(0)];
    }
    t / g.node_count as f64
}

fn molecule<R: Rng + ?Sized>(spec: &MoleculeSpec, rng: &mut R) -> Graph {
    let n = rng.gen_range(spec.atoms.0..=spec.atoms.1);
    let atom_dist = WeightedIndex::new([45, 20, 15, 10, 10]).expect("static weights");
    let bond_dist = WeightedIndex::new([70, 22, 8]).expect("static weights");
    let colors: Vec<usize> = (0..n).map(|_| atom_dist.sample(rng)).collect();
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    let mut parent = vec![usize::MAX; n];
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| degree[u] < MAX_VALENCE).collect();
        let u = *open.choose(rng).unwrap_or(&(v - 1));
        parent[v] = u;
        degree[u] += 1;
        degree[v] += 1;
        edges.push(Edge::typed(u, v, bond_dist.sample(rng)));
    }
    // Ring closures between a node and its great-great-grandparent or
    // deeper ancestor, giving rings of five or more atoms.
    let rings = rng.gen_range(0..=spec.max_rings);
    for _ in 0..rings {
        let v = rng.gen_range(0..n);
        let mut a = v;
        let steps = rng.gen_range(4..=6);
        for _ in 0..steps {
            if parent[a] == usize::MAX {
                break;
            }
            a = parent[a];
        }
        let exists = edges.iter().any(|e: &Edge| e.key() == (a.min(v), a.max(v)));
        if a != v && !exists && degree[a] < MAX_VALENCE && degree[v] < MAX_VALENCE {
            degree[a] += 1;
            degree[v] += 1;
            edges.push(Edge::typed(a, v, AROMATIC));
        }
    }
    Graph::new(n, edges, colors).expect("generated molecule is simple")
}

/// Generates the dataset with one standardized regression target.
pub fn generate_molecules(spec: &MoleculeSpec) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut graphs: Vec<Graph> = (0..spec.graphs).map(|_| molecule(spec, &mut rng)).collect();
    let raw: Vec<f64> = graphs.iter().map(raw_target).collect();
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    let var = raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / raw.len().max(1) as f64;
    let std = var.sqrt().max(1e-12);
    for (g, r) in graphs.iter_mut().zip(&raw) {
        g.label = Some(GraphLabel::Target(vec![(r - mean) / std]));
    }
    let mut ds = Dataset::new(graphs, Task::Regression { targets: 1 });
    ds.provenance = Some(serde_json::json!({
        "molecules": spec,
        "target_mean": mean,
        "target_std": std,
    }));
    ds
}
