//! Direct semantics of node classifiers, used as the reference for the
//! compiled weights. Distances come from a Floyd-Warshall table computed
//! here, not from the hop index.

use super::ast::{Formula, FormulaAst, ModalParam};
use crate::graph::Graph;

/// All-pairs distances, `None` for unreachable pairs.
pub fn floyd_warshall(graph: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = graph.node_count;
    let mut d = vec![vec![None; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = Some(0);
    }
    for e in &graph.edges {
        d[e.u][e.v] = Some(1);
        d[e.v][e.u] = Some(1);
    }
    for m in 0..n {
        for u in 0..n {
            let Some(um) = d[u][m] else { continue };
            for v in 0..n {
                if let Some(mv) = d[m][v] {
                    if d[u][v].is_none_or(|uv| um + mv < uv) {
                        d[u][v] = Some(um + mv);
                    }
                }
            }
        }
    }
    d
}

/// Membership vector of `eps_S(v)`.
pub fn param_set(param: &ModalParam, dist: &[Vec<Option<usize>>], v: usize) -> Vec<bool> {
    let n = dist.len();
    match param {
        ModalParam::Id => (0..n).map(|u| u == v).collect(),
        ModalParam::Edge(i) => (0..n).map(|u| dist[v][u] == Some(*i)).collect(),
        ModalParam::Not(p) => param_set(p, dist, v).into_iter().map(|x| !x).collect(),
        ModalParam::Union(a, b) => param_set(a, dist, v)
            .into_iter()
            .zip(param_set(b, dist, v))
            .map(|(x, y)| x || y)
            .collect(),
        ModalParam::Inter(a, b) => param_set(a, dist, v)
            .into_iter()
            .zip(param_set(b, dist, v))
            .map(|(x, y)| x && y)
            .collect(),
    }
}

fn eval_formula(f: &Formula, graph: &Graph, dist: &[Vec<Option<usize>>]) -> Vec<bool> {
    let n = graph.node_count;
    match f {
        Formula::True => vec![true; n],
        Formula::Atom { color, .. } => graph.colors.iter().map(|c| c == color).collect(),
        Formula::Not(g) => eval_formula(g, graph, dist).into_iter().map(|x| !x).collect(),
        Formula::And(a, b) => eval_formula(a, graph, dist)
            .into_iter()
            .zip(eval_formula(b, graph, dist))
            .map(|(x, y)| x && y)
            .collect(),
        Formula::Or(a, b) => eval_formula(a, graph, dist)
            .into_iter()
            .zip(eval_formula(b, graph, dist))
            .map(|(x, y)| x || y)
            .collect(),
        Formula::Modal { param, count, body } => {
            let inner = eval_formula(body, graph, dist);
            (0..n)
                .map(|v| {
                    let set = param_set(param, dist, v);
                    let hits = (0..n).filter(|&u| set[u] && inner[u]).count();
                    hits >= *count
                })
                .collect()
        }
    }
}

/// Truth of the formula at every node.
pub fn eval_bruteforce_all(ast: &FormulaAst, graph: &Graph) -> Vec<bool> {
    eval_formula(ast.root(), graph, &floyd_warshall(graph))
}

pub fn eval_bruteforce(ast: &FormulaAst, graph: &Graph, node: usize) -> bool {
    eval_bruteforce_all(ast, graph)[node]
}
