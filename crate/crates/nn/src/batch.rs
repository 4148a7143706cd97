//! Per-graph structure precomputation and block-diagonal batching.
//!
//! A batch concatenates its graphs' nodes; every sparse structure is
//! shifted by the graph's node offset, so message passing never crosses
//! graph boundaries.

use std::rc::Rc;

use splab_core::hops::{all_pairs_distances, Distance, HopAdjacency, HopIndex};
use splab_core::{Graph, GraphLabel};

use crate::tape::{Idx, Mat, Pairs};

/// Which structures a model needs from each graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Needs {
    /// Hop shells `1..=k`; hop 1 is always built.
    pub k: usize,
    pub relations: usize,
    pub gcn: bool,
    pub gat: bool,
    pub distances: bool,
}

impl Default for Needs {
    fn default() -> Self {
        Self {
            k: 1,
            relations: 0,
            gcn: false,
            gat: false,
            distances: false,
        }
    }
}

/// Structures of one graph in local node ids.
#[derive(Debug, Clone)]
pub struct GraphStructure {
    pub n: usize,
    pub colors: Vec<u32>,
    pub features: Option<Vec<Vec<f64>>>,
    pub label: Option<GraphLabel>,
    pub degrees: Vec<usize>,
    /// `hops[i - 1]` holds `(u, v)` for `v` in `N_i(u)`.
    pub hops: Vec<Pairs>,
    /// Typed direct edges, both directions, per relation id. Untyped edges
    /// count as relation 0.
    pub relations: Vec<Pairs>,
    /// Normalized `D^-1/2 (A + I) D^-1/2` entries.
    pub gcn: Option<Pairs>,
    /// Direct edges plus self loops.
    pub gat: Option<Pairs>,
    /// Row-major `n x n` distances, `u32::MAX` when unreachable.
    pub distances: Option<Vec<u32>>,
}

fn hop_pairs(index: &HopIndex, hop: usize) -> Pairs {
    let mut p = Pairs::default();
    for (u, v) in index.pairs(hop) {
        p.dst.push(u as u32);
        p.src.push(v as u32);
    }
    p
}

impl GraphStructure {
    pub fn build(graph: &Graph, needs: &Needs) -> Self {
        let k = needs.k.max(1);
        let index = HopIndex::build(graph, k);
        let hops = (1..=k).map(|i| hop_pairs(&index, i)).collect();
        let relations = if needs.relations > 0 {
            let mut rel = vec![Vec::new(); needs.relations];
            for e in &graph.edges {
                let r = e.relation.unwrap_or(0);
                assert!(r < needs.relations, "relation {r} out of range {}", needs.relations);
                rel[r].push((e.u as u32, e.v as u32));
                rel[r].push((e.v as u32, e.u as u32));
            }
            rel.into_iter()
                .map(|mut pairs| {
                    pairs.sort_unstable();
                    Pairs {
                        dst: pairs.iter().map(|p| p.0).collect(),
                        src: pairs.iter().map(|p| p.1).collect(),
                        weight: None,
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let gcn = needs.gcn.then(|| {
            let adj = HopAdjacency::build(&index);
            let mut p = Pairs {
                weight: Some(Vec::new()),
                ..Default::default()
            };
            for &(u, v, w) in adj.entries(1) {
                p.dst.push(u as u32);
                p.src.push(v as u32);
                p.weight.as_mut().expect("weighted").push(w);
            }
            p
        });
        let gat = needs.gat.then(|| {
            let mut p = Pairs::default();
            for u in 0..graph.node_count {
                let mut nb: Vec<usize> = index.shell(u, 1).to_vec();
                nb.push(u);
                nb.sort_unstable();
                for v in nb {
                    p.dst.push(u as u32);
                    p.src.push(v as u32);
                }
            }
            p
        });
        let distances = needs.distances.then(|| {
            all_pairs_distances(graph)
                .into_iter()
                .flatten()
                .map(|d| match d {
                    Distance::Finite(d) => d as u32,
                    Distance::Infinite => u32::MAX,
                })
                .collect()
        });
        Self {
            n: graph.node_count,
            colors: graph.colors.iter().map(|&c| c as u32).collect(),
            features: graph.features.clone(),
            label: graph.label.clone(),
            degrees: graph.degrees(),
            hops,
            relations,
            gcn,
            gat,
            distances,
        }
    }
}

/// Several graphs laid out as one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct Batch {
    pub n_nodes: usize,
    pub n_graphs: usize,
    /// Graph position of each node.
    pub node_graph: Idx,
    pub offsets: Vec<usize>,
    pub sizes: Vec<usize>,
    pub colors: Idx,
    pub features: Option<Mat>,
    pub degrees: Vec<usize>,
    pub hops: Vec<Rc<Pairs>>,
    pub relations: Vec<Rc<Pairs>>,
    pub gcn: Option<Rc<Pairs>>,
    pub gat: Option<Rc<Pairs>>,
    /// Per graph, row-major local distances.
    pub distances: Vec<Rc<Vec<u32>>>,
    pub labels: Vec<Option<GraphLabel>>,
}

fn shifted(parts: &[(&Pairs, usize)]) -> Pairs {
    let mut out = Pairs::default();
    let weighted = parts.iter().any(|(p, _)| p.weight.is_some());
    if weighted {
        out.weight = Some(Vec::new());
    }
    for (p, off) in parts {
        let off = *off as u32;
        out.dst.extend(p.dst.iter().map(|&x| x + off));
        out.src.extend(p.src.iter().map(|&x| x + off));
        if let Some(w) = out.weight.as_mut() {
            w.extend(p.weight.as_ref().expect("all parts weighted"));
        }
    }
    out
}

impl Batch {
    pub fn new(graphs: &[&GraphStructure]) -> Self {
        let mut offsets = Vec::with_capacity(graphs.len());
        let mut n_nodes = 0;
        for g in graphs {
            offsets.push(n_nodes);
            n_nodes += g.n;
        }
        let node_graph: Vec<u32> = graphs
            .iter()
            .enumerate()
            .flat_map(|(i, g)| std::iter::repeat_n(i as u32, g.n))
            .collect();
        let colors: Vec<u32> = graphs.iter().flat_map(|g| g.colors.iter().copied()).collect();
        let features = if graphs.iter().all(|g| g.features.is_some()) && !graphs.is_empty() {
            let rows: Vec<&Vec<f64>> = graphs
                .iter()
                .flat_map(|g| g.features.as_ref().expect("checked"))
                .collect();
            let d = rows.first().map_or(0, |r| r.len());
            Some(Mat::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j]))
        } else {
            None
        };
        let with_off = |f: &dyn Fn(&GraphStructure) -> &Pairs| -> Pairs {
            let parts: Vec<(&Pairs, usize)> =
                graphs.iter().zip(&offsets).map(|(g, &o)| (f(g), o)).collect();
            shifted(&parts)
        };
        let k = graphs.iter().map(|g| g.hops.len()).min().unwrap_or(0);
        let hops = (0..k).map(|i| Rc::new(with_off(&|g| &g.hops[i]))).collect();
        let r = graphs.iter().map(|g| g.relations.len()).min().unwrap_or(0);
        let relations = (0..r).map(|j| Rc::new(with_off(&|g| &g.relations[j]))).collect();
        let gcn = graphs
            .iter()
            .all(|g| g.gcn.is_some())
            .then(|| Rc::new(with_off(&|g| g.gcn.as_ref().expect("checked"))));
        let gat = graphs
            .iter()
            .all(|g| g.gat.is_some())
            .then(|| Rc::new(with_off(&|g| g.gat.as_ref().expect("checked"))));
        let distances = if graphs.iter().all(|g| g.distances.is_some()) {
            graphs
                .iter()
                .map(|g| Rc::new(g.distances.clone().expect("checked")))
                .collect()
        } else {
            Vec::new()
        };
        Self {
            n_nodes,
            n_graphs: graphs.len(),
            node_graph: Rc::new(node_graph),
            sizes: graphs.iter().map(|g| g.n).collect(),
            offsets,
            colors: Rc::new(colors),
            features,
            degrees: graphs.iter().flat_map(|g| g.degrees.iter().copied()).collect(),
            hops,
            relations,
            gcn,
            gat,
            distances,
            labels: graphs.iter().map(|g| g.label.clone()).collect(),
        }
    }

    /// Convenience: structures built and batched in one step.
    pub fn from_graphs(graphs: &[Graph], needs: &Needs) -> Self {
        let s: Vec<GraphStructure> = graphs.iter().map(|g| GraphStructure::build(g, needs)).collect();
        let refs: Vec<&GraphStructure> = s.iter().collect();
        Self::new(&refs)
    }

    /// Class ids of all graphs; `None` if any label is missing or not a class.
    pub fn class_targets(&self) -> Option<Vec<usize>> {
        self.labels
            .iter()
            .map(|l| l.as_ref()?.class().and_then(|c| usize::try_from(c).ok()))
            .collect()
    }

    /// Regression targets as a `graphs x t` matrix.
    pub fn regression_targets(&self) -> Option<Mat> {
        let rows: Option<Vec<&Vec<f64>>> = self
            .labels
            .iter()
            .map(|l| match l {
                Some(GraphLabel::Target(t)) => Some(t),
                _ => None,
            })
            .collect();
        let rows = rows?;
        let t = rows.first().map_or(0, |r| r.len());
        Some(Mat::from_shape_fn((rows.len(), t), |(i, j)| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_shift_pairs() {
        let a = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let b = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let batch = Batch::from_graphs(&[a, b], &Needs { k: 2, ..Default::default() });
        assert_eq!(batch.n_nodes, 5);
        assert_eq!(batch.offsets, vec![0, 2]);
        assert_eq!(batch.hops[0].dst, vec![0, 1, 2, 3, 3, 4]);
        assert_eq!(batch.hops[0].src, vec![1, 0, 3, 2, 4, 3]);
        assert_eq!(batch.hops[1].dst, vec![2, 4]);
        assert_eq!(batch.node_graph.as_slice(), &[0, 0, 1, 1, 1]);
    }

    #[test]
    fn untyped_edges_are_relation_zero() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let s = GraphStructure::build(&g, &Needs { relations: 2, ..Default::default() });
        assert_eq!(s.relations[0].len(), 2);
        assert!(s.relations[1].is_empty());
    }
}
