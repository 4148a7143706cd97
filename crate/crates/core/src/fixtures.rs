//! Small hand-drawn graphs used throughout the test suites, stored as JSONL
//! under `fixtures/`.

use crate::graph::Graph;
use crate::io::parse_jsonl;

fn load(name: &str, text: &str) -> Vec<Graph> {
    parse_jsonl(text.as_bytes(), name)
        .unwrap_or_else(|e| panic!("fixture {name}: {e}"))
        .graphs
}

fn pair(name: &str, text: &str) -> (Graph, Graph) {
    let mut g = load(name, text);
    assert_eq!(g.len(), 2, "fixture {name} must hold a pair");
    let b = g.pop().unwrap();
    let a = g.pop().unwrap();
    (a, b)
}

/// Twelve-node graph whose node 0 has hop shells of sizes 3, 4 and 4.
pub fn overview() -> Graph {
    load("overview", include_str!("../fixtures/overview.jsonl")).remove(0)
}

/// Two disjoint 4-cycles and one 8-cycle: 1-WL equivalent, SP separates them.
pub fn g1_g2() -> (Graph, Graph) {
    pair("g1_g2", include_str!("../fixtures/g1_g2.jsonl"))
}

/// Connected pair with Wiener indices 50 and 56 that 1-WL cannot separate.
pub fn i1_i2() -> (Graph, Graph) {
    pair("i1_i2", include_str!("../fixtures/i1_i2.jsonl"))
}

/// Triangular prism and K_{3,3}: neither 1-WL nor SP separates them.
pub fn h1_h2() -> (Graph, Graph) {
    pair("h1_h2", include_str!("../fixtures/h1_h2.jsonl"))
}

/// Layered `l = 3, w = 3` graphs: red node with three blue neighbours
/// (label 0) and with two (label 1).
pub fn levels_false_true() -> (Graph, Graph) {
    pair("levels", include_str!("../fixtures/levels.jsonl"))
}

/// Layered `l = 4, w = 3` positive graph for `h = 1` and its negative with
/// the extra edge `(4, 11)`.
pub fn negative_example() -> (Graph, Graph) {
    pair("negative", include_str!("../fixtures/negative.jsonl"))
}

/// Every unordered fixture pair, named.
pub fn all_pairs() -> Vec<(&'static str, Graph, Graph)> {
    let (g1, g2) = g1_g2();
    let (i1, i2) = i1_i2();
    let (h1, h2) = h1_h2();
    vec![("G1/G2", g1, g2), ("I1/I2", i1, i2), ("H1/H2", h1, h2)]
}
