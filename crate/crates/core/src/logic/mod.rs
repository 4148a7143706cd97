//! Counting modal node classifiers over shortest-path hop predicates:
//! parsing, compilation to layer weights, and a reference evaluator.

mod ast;
mod compile;
mod eval;
mod parser;

use rand::Rng;

pub use ast::{Formula, FormulaAst, ModalKind, ModalParam};
pub use compile::{
    compile, compile_with, run_compiled, run_compiled_trace, CompileError, CompiledClassifier,
    EmptyParamPolicy,
};
pub use eval::{eval_bruteforce, eval_bruteforce_all, floyd_warshall, param_set};
pub use parser::{
    parse_formula, parse_formula_with, Palette, ParseError, ParseOptions, DEFAULT_COLOR_NAMES,
};

/// Bounds for [`random_formula`].
#[derive(Debug, Clone, Copy)]
pub struct FormulaShape {
    pub max_quantifier_depth: usize,
    pub max_count: usize,
    pub k: usize,
    pub colors: usize,
    /// Boolean connectives allowed between two modal levels.
    pub max_boolean_depth: usize,
}

impl Default for FormulaShape {
    fn default() -> Self {
        Self {
            max_quantifier_depth: 3,
            max_count: 3,
            k: 3,
            colors: 3,
            max_boolean_depth: 2,
        }
    }
}

/// Draws a formula over every supported modal parameter shape.
pub fn random_formula<R: Rng + ?Sized>(rng: &mut R, shape: &FormulaShape) -> Formula {
    gen(rng, shape, shape.max_quantifier_depth, shape.max_boolean_depth)
}

fn random_kind<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ModalKind {
    let i = rng.gen_range(1..=k);
    match rng.gen_range(0..8) {
        0 => ModalKind::Id,
        1 => ModalKind::Edge(i),
        2 => ModalKind::NeitherEdgeNorId(i),
        3 => ModalKind::IdOrEdge(i),
        4 => ModalKind::NotId,
        5 => ModalKind::NotEdge(i),
        6 => ModalKind::All(i),
        _ => ModalKind::Empty(i),
    }
}

fn gen<R: Rng + ?Sized>(rng: &mut R, shape: &FormulaShape, qd: usize, bd: usize) -> Formula {
    let leaf = |rng: &mut R| {
        if rng.gen_bool(0.15) {
            Formula::True
        } else {
            let c = rng.gen_range(0..shape.colors);
            Formula::Atom {
                name: Palette::default().name_of(c),
                color: c,
            }
        }
    };
    let modal_weight = if qd > 0 { 4 } else { 0 };
    let bool_weight = if bd > 0 { 3 } else { 0 };
    let total = 2 + modal_weight + bool_weight;
    let pick = rng.gen_range(0..total);
    if pick < 2 {
        leaf(rng)
    } else if pick < 2 + modal_weight {
        let kind = random_kind(rng, shape.k);
        let count = rng.gen_range(1..=shape.max_count);
        let body = gen(rng, shape, qd - 1, shape.max_boolean_depth);
        Formula::modal(kind.to_param(), count, body)
    } else {
        match rng.gen_range(0..3) {
            0 => Formula::not(gen(rng, shape, qd, bd - 1)),
            1 => Formula::and(gen(rng, shape, qd, bd - 1), gen(rng, shape, qd, bd - 1)),
            _ => Formula::or(gen(rng, shape, qd, bd - 1), gen(rng, shape, qd, bd - 1)),
        }
    }
}
