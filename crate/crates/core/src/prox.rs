//! Proximity datasets: layered graphs where every red node has exactly two
//! blue nodes within `h` hops (positive), paired with a copy that gains one
//! edge pulling a further blue node into range (negative).
//!
//! Every pair draws from its own ChaCha20 stream (`seed`, stream = pair
//! index), so output is reproducible across platforms and independent of
//! generation order.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Edge, Graph, GraphLabel, Task};
use crate::hops::HopIndex;

pub const RED: usize = 0;
pub const BLUE: usize = 1;
/// Auxiliary colors take ids `2..2 + aux_colors`.
pub const FIRST_AUX_COLOR: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxSpec {
    pub h: usize,
    pub n_pairs: usize,
    /// Inclusive level count range.
    pub levels: (usize, usize),
    /// Inclusive level width range.
    pub width: (usize, usize),
    /// Red node counts; pairs are split evenly across them in order.
    pub red_counts: Vec<usize>,
    /// Distant blue count is drawn from `0..=max_distant_blues`.
    pub max_distant_blues: usize,
    pub aux_colors: usize,
    pub seed: u64,
    /// Coloring attempts per structure before the structure is redrawn.
    pub coloring_tries: usize,
    /// Structures drawn per pair before giving up.
    pub structure_tries: usize,
}

impl ProxSpec {
    pub fn new(h: usize, n_pairs: usize, seed: u64) -> Self {
        Self {
            h,
            n_pairs,
            levels: (15, 25),
            width: (3, 10),
            red_counts: vec![1, 2, 3],
            max_distant_blues: 3,
            aux_colors: 8,
            seed,
            coloring_tries: 200,
            structure_tries: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.h == 0 {
            problems.push("h must be at least 1".to_string());
        }
        if self.levels.0 < 2 || self.levels.0 > self.levels.1 {
            problems.push(format!("bad level range {:?}", self.levels));
        }
        if self.width.0 < 1 || self.width.0 > self.width.1 {
            problems.push(format!("bad width range {:?}", self.width));
        }
        if self.red_counts.is_empty() || self.red_counts.contains(&0) {
            problems.push("red counts must be non-empty and positive".to_string());
        } else if !self.n_pairs.is_multiple_of(self.red_counts.len()) {
            problems.push(format!(
                "n_pairs {} not divisible by {} red partitions",
                self.n_pairs,
                self.red_counts.len()
            ));
        }
        if self.aux_colors == 0 {
            problems.push("need at least one auxiliary color".to_string());
        }
        if self.coloring_tries == 0 || self.structure_tries == 0 {
            problems.push("retry budgets must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Generation(problems.join("; ")))
        }
    }

    /// Red nodes in pair `pair`: equal consecutive blocks per red count.
    pub fn red_count_for(&self, pair: usize) -> usize {
        let per = self.n_pairs / self.red_counts.len();
        self.red_counts[(pair / per).min(self.red_counts.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxPair {
    pub positive: Graph,
    pub negative: Graph,
    pub added_edge: (usize, usize),
}

/// `l` levels of `w` nodes; node `level * w + j`. Consecutive levels are
/// completely connected, levels themselves are independent sets.
pub fn gen_structure(l: usize, w: usize) -> Graph {
    let mut edges = Vec::with_capacity(l.saturating_sub(1) * w * w);
    for level in 0..l.saturating_sub(1) {
        for a in 0..w {
            for b in 0..w {
                edges.push(Edge::new(level * w + a, (level + 1) * w + b));
            }
        }
    }
    Graph::new(l * w, edges, vec![0; l * w]).expect("layered structure is simple")
}

fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Colors of one positive graph, or `None` when the attempt gets stuck.
fn try_coloring<R: Rng + ?Sized>(
    spec: &ProxSpec,
    adj: &[Vec<usize>],
    n_red: usize,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let n = adj.len();
    if n_red > n {
        return None;
    }
    let reds: Vec<usize> = rand::seq::index::sample(rng, n, n_red).into_vec();
    let dists: Vec<Vec<usize>> = reds.iter().map(|&r| bfs(adj, r)).collect();
    let mut colors: Vec<Option<usize>> = vec![None; n];
    for &r in &reds {
        colors[r] = Some(RED);
    }
    let in_range = |v: usize, i: usize| dists[i][v] >= 1 && dists[i][v] <= spec.h;
    let mut blues_near = vec![0usize; reds.len()];
    while blues_near.iter().any(|&c| c < 2) {
        let candidates: Vec<usize> = (0..n)
            .filter(|&v| colors[v].is_none())
            .filter(|&v| (0..reds.len()).any(|i| in_range(v, i)))
            .filter(|&v| (0..reds.len()).all(|i| !in_range(v, i) || blues_near[i] < 2))
            .collect();
        let &pick = candidates.choose(rng)?;
        colors[pick] = Some(BLUE);
        for (i, c) in blues_near.iter_mut().enumerate() {
            if in_range(pick, i) {
                *c += 1;
            }
        }
    }
    let distant: Vec<usize> = (0..n)
        .filter(|&v| colors[v].is_none())
        .filter(|&v| (0..reds.len()).all(|i| dists[i][v] > spec.h))
        .collect();
    let m = rng.gen_range(0..=spec.max_distant_blues);
    if m <= distant.len() {
        for v in distant.choose_multiple(rng, m) {
            colors[*v] = Some(BLUE);
        }
    }
    Some(
        colors
            .into_iter()
            .map(|c| c.unwrap_or_else(|| FIRST_AUX_COLOR + rng.gen_range(0..spec.aux_colors)))
            .collect(),
    )
}

/// All non-edges whose addition brings some blue node within `h` hops of a
/// red node it was previously farther from.
pub fn violating_edges(graph: &Graph, h: usize) -> Vec<(usize, usize)> {
    let adj = graph.adjacency();
    let n = graph.node_count;
    let reds: Vec<usize> = (0..n).filter(|&v| graph.colors[v] == RED).collect();
    let blues: Vec<usize> = (0..n).filter(|&v| graph.colors[v] == BLUE).collect();
    let red_d: Vec<Vec<usize>> = reds.iter().map(|&r| bfs(&adj, r)).collect();
    let blue_d: Vec<Vec<usize>> = blues.iter().map(|&b| bfs(&adj, b)).collect();
    // (red, blue) pairs currently out of range.
    let mut far = Vec::new();
    for (i, rd) in red_d.iter().enumerate() {
        for (j, &b) in blues.iter().enumerate() {
            if rd[b] > h {
                far.push((i, j));
            }
        }
    }
    let via = |x: usize, y: usize| x.saturating_add(1).saturating_add(y);
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if adj[a].binary_search(&b).is_ok() {
                continue;
            }
            let hit = far.iter().any(|&(i, j)| {
                let (rd, bd) = (&red_d[i], &blue_d[j]);
                via(rd[a], bd[b]).min(via(rd[b], bd[a])) <= h
            });
            if hit {
                out.push((a, b));
            }
        }
    }
    out
}

/// Generates one pair on an `l x w` structure. Fails when no coloring is
/// found within the retry budget or no violating edge exists.
pub fn gen_pair<R: Rng + ?Sized>(
    spec: &ProxSpec,
    l: usize,
    w: usize,
    n_red: usize,
    rng: &mut R,
) -> Result<ProxPair> {
    let structure = gen_structure(l, w);
    let adj = structure.adjacency();
    for _ in 0..spec.coloring_tries {
        let Some(colors) = try_coloring(spec, &adj, n_red, rng) else {
            continue;
        };
        let positive = Graph { colors, ..structure.clone() }.with_label(GraphLabel::Class(1));
        let candidates = violating_edges(&positive, spec.h);
        let Some(&(a, b)) = candidates.choose(rng) else {
            continue;
        };
        let mut negative = positive.clone();
        negative.edges.push(Edge::new(a, b));
        negative.label = Some(GraphLabel::Class(0));
        return Ok(ProxPair {
            positive,
            negative,
            added_edge: (a, b),
        });
    }
    Err(Error::Generation(format!(
        "no valid coloring with a violating edge for l={l}, w={w}, reds={n_red}, h={} after {} tries",
        spec.h, spec.coloring_tries
    )))
}

fn blue_counts(graph: &Graph, h: usize) -> Vec<usize> {
    let idx = HopIndex::build(graph, h);
    (0..graph.node_count)
        .filter(|&u| graph.colors[u] == RED)
        .map(|u| {
            (1..=h)
                .flat_map(|i| idx.shell(u, i))
                .filter(|&&v| graph.colors[v] == BLUE)
                .count()
        })
        .collect()
}

/// True iff every red node has at most two blue nodes within `h` hops.
pub fn check_label(graph: &Graph, h: usize) -> bool {
    blue_counts(graph, h).into_iter().all(|c| c <= 2)
}

/// True iff every red node has exactly two blue nodes within `h` hops.
pub fn has_exactly_two(graph: &Graph, h: usize) -> bool {
    blue_counts(graph, h).into_iter().all(|c| c == 2)
}

fn pair_rng(seed: u64, pair: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(pair as u64);
    rng
}

/// Generates pair `index` of the dataset described by `spec`.
pub fn gen_indexed_pair(spec: &ProxSpec, index: usize) -> Result<ProxPair> {
    let mut rng = pair_rng(spec.seed, index);
    let n_red = spec.red_count_for(index);
    let mut last = None;
    for _ in 0..spec.structure_tries {
        let l = rng.gen_range(spec.levels.0..=spec.levels.1);
        let w = rng.gen_range(spec.width.0..=spec.width.1);
        match gen_pair(spec, l, w, n_red, &mut rng) {
            Ok(p) => return Ok(p),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Generation(format!(
        "pair {index}: gave up after {} structures ({}); spec: {}",
        spec.structure_tries,
        last.map(|e| e.to_string()).unwrap_or_default(),
        serde_json::to_string(spec).unwrap_or_default()
    )))
}

pub fn generate_pairs(spec: &ProxSpec) -> Result<Vec<ProxPair>> {
    spec.validate()?;
    (0..spec.n_pairs).map(|i| gen_indexed_pair(spec, i)).collect()
}

/// Positive then negative graph for each pair, labels 1 and 0.
pub fn generate_dataset(spec: &ProxSpec) -> Result<Dataset> {
    let pairs = generate_pairs(spec)?;
    let graphs = pairs
        .into_iter()
        .flat_map(|p| [p.positive, p.negative])
        .collect();
    let mut ds = Dataset::new(graphs, Task::BinaryClass);
    ds.provenance = Some(serde_json::json!({ "prox": spec }));
    Ok(ds)
}

/// Recovers the [`ProxSpec`] stored by [`generate_dataset`].
pub fn spec_of(dataset: &Dataset) -> Option<ProxSpec> {
    let v = dataset.provenance.as_ref()?.get("prox")?;
    serde_json::from_value(v.clone()).ok()
}
