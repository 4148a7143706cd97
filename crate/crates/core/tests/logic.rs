use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splab_core::hops::HopIndex;
use splab_core::logic::{
    compile, eval_bruteforce_all, parse_formula, parse_formula_with, random_formula, run_compiled,
    run_compiled_trace, FormulaAst, FormulaShape, ParseOptions,
};
use splab_core::{fixtures, Edge, Graph};

mod common;

fn random_colored(rng: &mut ChaCha8Rng, colors: usize) -> Graph {
    let n = rng.gen_range(1..=8);
    let p = rng.gen_range(0.1..0.7);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push(Edge::new(u, v));
            }
        }
    }
    let cols = (0..n).map(|_| rng.gen_range(0..colors)).collect();
    Graph::new(n, edges, cols).unwrap()
}

#[test]
fn compiled_networks_agree_with_the_evaluator() {
    let shape = FormulaShape::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..250 {
        let ast = FormulaAst::new(random_formula(&mut rng, &shape));
        let cc = compile(&ast, shape.k).unwrap();
        for _ in 0..4 {
            let g = random_colored(&mut rng, shape.colors);
            let idx = HopIndex::build(&g, shape.k);
            assert_eq!(run_compiled(&cc, &g, &idx), eval_bruteforce_all(&ast, &g), "{}", ast.root());
            for state in run_compiled_trace(&cc, &g, &idx).last().unwrap() {
                for &x in state {
                    assert!(x.abs() < 1e-9 || (x - 1.0).abs() < 1e-9, "non-boolean state {x}");
                }
            }
        }
    }
}

#[test]
fn two_hop_counting_on_fixture_pair() {
    let ast = parse_formula("<e2>^>=2 True").unwrap();
    assert_eq!(ast.quantifier_depth(), 1);
    let cc = compile(&ast, 2).unwrap();
    let (g1, g2) = fixtures::g1_g2();
    assert!(run_compiled(&cc, &g1, &HopIndex::build(&g1, 2)).iter().all(|&b| !b));
    assert!(run_compiled(&cc, &g2, &HopIndex::build(&g2, 2)).iter().all(|&b| b));
}

#[test]
fn red_neighbour_on_a_path() {
    let g = Graph::new(3, vec![Edge::new(0, 1), Edge::new(1, 2)], vec![0, 1, 1]).unwrap();
    let ast = parse_formula("<e1> Red(x)").unwrap();
    let cc = compile(&ast, 1).unwrap();
    let out = run_compiled(&cc, &g, &HopIndex::build(&g, 1));
    assert_eq!(out, vec![false, true, false]);
    assert_eq!(out, eval_bruteforce_all(&ast, &g));
    let red = parse_formula("Red(x)").unwrap();
    let cc = compile(&red, 1).unwrap();
    assert_eq!(run_compiled(&cc, &g, &HopIndex::build(&g, 1)), vec![true, false, false]);
}

#[test]
fn syntax_errors_carry_positions() {
    let e = parse_formula("Red(x &").unwrap_err();
    assert_eq!((e.line, e.column), (1, 7));
    let opts = ParseOptions {
        max_hop: Some(2),
        ..Default::default()
    };
    assert!(parse_formula_with("<e3> True", &opts).is_err());
    assert_eq!(parse_formula("Red(x) & Blue(x)").unwrap().len(), 3);
}

#[test]
fn renaming_colors_permutes_dimensions() {
    let a = compile(&parse_formula("<e1>^>=2 (Red(x) & !Blue(x))").unwrap(), 1).unwrap();
    let b = compile(&parse_formula("<e1>^>=2 (Blue(x) & !Red(x))").unwrap(), 1).unwrap();
    assert_eq!(a.dim, b.dim);
    assert_eq!(a.c, b.c);
    assert_eq!(a.b, b.b);
    let mut ca = a.atom_colors.clone();
    let mut cb = b.atom_colors.clone();
    ca.sort();
    cb.sort();
    assert_eq!(ca, cb);
}

proptest! {
    #[test]
    fn display_reparses_to_the_same_formula(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(&mut rng, &FormulaShape::default());
        let text = f.to_string();
        let back = parse_formula(&text).unwrap();
        prop_assert_eq!(back.root(), &f);
    }

    #[test]
    fn compiled_weights_are_small_integers(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ast = FormulaAst::new(random_formula(&mut rng, &FormulaShape::default()));
        let cc = compile(&ast, 3).unwrap();
        for m in cc.a.iter().chain([&cc.c, &cc.r]) {
            for &x in m.iter().flatten() {
                prop_assert!(x == -1.0 || x == 0.0 || x == 1.0);
            }
        }
        for &x in &cc.b {
            prop_assert!(x.fract() == 0.0 && x <= 1.0);
        }
    }
}
