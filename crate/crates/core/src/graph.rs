//! Graph and dataset data model.
//!
//! Graphs are simple and undirected. Disconnected graphs are allowed
//! everywhere; use [`Graph::is_connected`] when connectivity matters.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected edge, optionally typed by a relation id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub relation: Option<usize>,
}

impl Edge {
    pub fn new(u: usize, v: usize) -> Self {
        Self { u, v, relation: None }
    }

    pub fn typed(u: usize, v: usize, relation: usize) -> Self {
        Self { u, v, relation: Some(relation) }
    }

    /// Endpoints ordered `(min, max)`.
    pub fn key(&self) -> (usize, usize) {
        if self.u <= self.v {
            (self.u, self.v)
        } else {
            (self.v, self.u)
        }
    }
}

/// Graph-level target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphLabel {
    Class(i64),
    Target(Vec<f64>),
}

impl GraphLabel {
    pub fn class(&self) -> Option<i64> {
        match self {
            GraphLabel::Class(c) => Some(*c),
            GraphLabel::Target(_) => None,
        }
    }
}

/// A simple undirected graph with node colors and optional dense features.
///
/// Fields are plain data so that invalid graphs can be represented and
/// reported by [`Graph::validate`]. The checked constructors reject them.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub node_count: usize,
    pub edges: Vec<Edge>,
    pub colors: Vec<usize>,
    pub features: Option<Vec<Vec<f64>>>,
    pub label: Option<GraphLabel>,
}

impl Graph {
    /// Builds a graph with uniform color 0, rejecting invariant violations.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(
            node_count,
            edges.iter().map(|&(u, v)| Edge::new(u, v)).collect(),
            vec![0; node_count],
        )
    }

    pub fn new(node_count: usize, edges: Vec<Edge>, colors: Vec<usize>) -> Result<Self> {
        let graph = Self {
            node_count,
            edges,
            colors,
            features: None,
            label: None,
        };
        graph.checked()
    }

    pub fn with_label(mut self, label: GraphLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        self.features = Some(features);
        self.checked()
    }

    pub fn with_colors(mut self, colors: Vec<usize>) -> Result<Self> {
        self.colors = colors;
        self.checked()
    }

    fn checked(self) -> Result<Self> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::Invalid(violations.join("; ")))
        }
    }

    /// Lists every invariant violation; empty iff the graph is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.edges {
            if e.u >= self.node_count || e.v >= self.node_count {
                out.push(format!(
                    "edge ({}, {}) out of range for {} nodes",
                    e.u, e.v, self.node_count
                ));
                continue;
            }
            if e.u == e.v {
                out.push(format!("self-loop at {}", e.u));
                continue;
            }
            if !seen.insert(e.key()) {
                out.push("duplicate edge".to_string());
            }
        }
        if self.colors.len() != self.node_count {
            out.push(format!(
                "{} colors for {} nodes",
                self.colors.len(),
                self.node_count
            ));
        }
        if let Some(features) = &self.features {
            if features.len() != self.node_count {
                out.push(format!(
                    "{} feature rows for {} nodes",
                    features.len(),
                    self.node_count
                ));
            }
            if let Some(first) = features.first() {
                if features.iter().any(|f| f.len() != first.len()) {
                    out.push("feature vectors differ in dimension".to_string());
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted adjacency lists. Invalid edges are skipped.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.node_count];
        for e in &self.edges {
            if e.u != e.v && e.u < self.node_count && e.v < self.node_count {
                sets[e.u].insert(e.v);
                sets[e.v].insert(e.u);
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency().iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let key = if u <= v { (u, v) } else { (v, u) };
        self.edges.iter().any(|e| e.key() == key)
    }

    /// Number of distinct relation ids (0 when untyped).
    pub fn relation_count(&self) -> usize {
        self.edges
            .iter()
            .filter_map(|e| e.relation)
            .max()
            .map_or(0, |r| r + 1)
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.node_count
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.node_count, "permutation length");
        let mut colors = vec![0; self.node_count];
        for (i, &p) in perm.iter().enumerate() {
            colors[p] = self.colors[i];
        }
        let features = self.features.as_ref().map(|f| {
            let mut out = vec![Vec::new(); self.node_count];
            for (i, &p) in perm.iter().enumerate() {
                out[p] = f[i].clone();
            }
            out
        });
        Graph {
            node_count: self.node_count,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    u: perm[e.u],
                    v: perm[e.v],
                    relation: e.relation,
                })
                .collect(),
            colors,
            features,
            label: self.label.clone(),
        }
    }

    /// Copy with the edge `{u, v}` removed (any relation).
    pub fn without_edge(&self, u: usize, v: usize) -> Graph {
        let key = if u <= v { (u, v) } else { (v, u) };
        let mut g = self.clone();
        g.edges.retain(|e| e.key() != key);
        g
    }
}

/// Learning task attached to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    BinaryClass,
    MultiClass { classes: usize },
    Regression { targets: usize },
}

impl Task {
    /// Width of the model output layer.
    pub fn output_dim(&self) -> usize {
        match *self {
            Task::BinaryClass => 2,
            Task::MultiClass { classes } => classes,
            Task::Regression { targets } => targets,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Task::Regression { .. })
    }
}

/// One train/validation/test partition of graph ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks disjointness and bounds against a dataset of `len` graphs.
    pub fn check(&self, len: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for &id in self.train.iter().chain(&self.valid).chain(&self.test) {
            if id >= len {
                return Err(Error::Invalid(format!("split id {id} out of range {len}")));
            }
            if !seen.insert(id) {
                return Err(Error::Invalid(format!("split id {id} appears twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub task: Task,
    pub splits: Vec<Split>,
    /// Free-form generator metadata carried through serialization.
    pub provenance: Option<serde_json::Value>,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, task: Task) -> Self {
        Self {
            graphs,
            task,
            splits: Vec::new(),
            provenance: None,
        }
    }

    /// Infers the task from graph labels: integer labels give a
    /// classification task, vector labels a regression task.
    pub fn infer_task(graphs: &[Graph]) -> Task {
        let mut classes = BTreeSet::new();
        for g in graphs {
            match &g.label {
                Some(GraphLabel::Target(t)) => return Task::Regression { targets: t.len() },
                Some(GraphLabel::Class(c)) => {
                    classes.insert(*c);
                }
                None => {}
            }
        }
        let max = classes.iter().max().copied().unwrap_or(0).max(0) as usize;
        let c = classes.len().max(max + 1);
        if c <= 2 {
            Task::BinaryClass
        } else {
            Task::MultiClass { classes: c }
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Number of distinct node colors, as `max color + 1`.
    pub fn color_count(&self) -> usize {
        self.graphs
            .iter()
            .flat_map(|g| g.colors.iter().copied())
            .max()
            .map_or(1, |c| c + 1)
    }

    pub fn relation_count(&self) -> usize {
        self.graphs.iter().map(Graph::relation_count).max().unwrap_or(0)
    }

    pub fn mean_node_count(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.node_count as f64).sum::<f64>() / self.graphs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loop_is_reported() {
        let g = Graph {
            node_count: 3,
            edges: vec![Edge::new(0, 1), Edge::new(2, 2)],
            colors: vec![0; 3],
            features: None,
            label: None,
        };
        assert_eq!(g.validate(), vec!["self-loop at 2".to_string()]);
    }

    #[test]
    fn duplicate_edge_is_reported() {
        let g = Graph {
            node_count: 2,
            edges: vec![Edge::new(0, 1), Edge::new(1, 0)],
            colors: vec![0; 2],
            features: None,
            label: None,
        };
        assert_eq!(g.validate(), vec!["duplicate edge".to_string()]);
    }

    #[test]
    fn two_disjoint_squares_validate() {
        let g = Graph::from_edges(
            8,
            &[(0, 1), (0, 2), (2, 3), (3, 1), (4, 5), (4, 6), (6, 7), (7, 5)],
        )
        .unwrap();
        assert!(g.validate().is_empty());
        assert!(!g.is_connected());
    }

    #[test]
    fn ragged_features_rejected() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(g.with_features(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn split_overlap_rejected() {
        let s = Split {
            train: vec![0, 1],
            valid: vec![1],
            test: vec![2],
        };
        assert!(s.check(3).is_err());
        let ok = Split {
            train: vec![0],
            valid: vec![1],
            test: vec![2],
        };
        assert!(ok.check(3).is_ok());
        assert!(ok.check(2).is_err());
    }

    #[test]
    fn permutation_keeps_colors_with_nodes() {
        let g = Graph::new(3, vec![Edge::new(0, 1)], vec![5, 6, 7]).unwrap();
        let p = g.permuted(&[2, 0, 1]);
        assert_eq!(p.colors, vec![6, 7, 5]);
        assert!(p.has_edge(2, 0));
    }
}
