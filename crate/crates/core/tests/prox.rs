use proptest::prelude::*;
use splab_core::hops::diameter;
use splab_core::io::emit_jsonl;
use splab_core::prox::{
    check_label, gen_indexed_pair, gen_structure, generate_dataset, generate_pairs, has_exactly_two, spec_of,
    violating_edges, ProxSpec, BLUE, RED,
};
use splab_core::{fixtures, Distance, Graph, GraphLabel};

#[test]
fn structure_shapes() {
    let g = gen_structure(3, 3);
    assert_eq!((g.node_count, g.edge_count()), (9, 18));
    let e = gen_structure(2, 1);
    assert_eq!((e.node_count, e.edge_count()), (2, 1));
    for (l, w) in [(3, 3), (6, 2), (15, 4)] {
        assert_eq!(diameter(&gen_structure(l, w)), Distance::Finite(l - 1));
    }
}

#[test]
fn fixture_labels() {
    let (falsy, truthy) = fixtures::levels_false_true();
    assert!(!check_label(&falsy, 1));
    assert!(check_label(&truthy, 1));
    let (pos, neg) = fixtures::negative_example();
    assert!(has_exactly_two(&pos, 1));
    assert!(!check_label(&neg, 1));
    assert_eq!(neg.without_edge(4, 11).edges.len(), pos.edges.len());
}

#[test]
fn no_red_is_vacuously_true() {
    let g = Graph::new(3, gen_structure(3, 1).edges, vec![BLUE; 3]).unwrap();
    assert!(check_label(&g, 2));
}

fn assert_pair_valid(spec: &ProxSpec, index: usize) {
    let p = gen_indexed_pair(spec, index).unwrap();
    assert!(check_label(&p.positive, spec.h) && has_exactly_two(&p.positive, spec.h), "pair {index}");
    assert!(!check_label(&p.negative, spec.h), "pair {index}");
    assert_eq!(p.positive.colors, p.negative.colors);
    assert_eq!(p.negative.edge_count(), p.positive.edge_count() + 1);
    let (a, b) = p.added_edge;
    let mut restored = p.negative.without_edge(a, b);
    restored.label = p.positive.label.clone();
    assert_eq!(restored, p.positive);
    let reds = p.positive.colors.iter().filter(|&&c| c == RED).count();
    assert_eq!(reds, spec.red_count_for(index));
}

#[test]
fn generated_pairs_pass_the_checker() {
    for h in [1, 3, 5, 10] {
        let spec = ProxSpec::new(h, 30, 40 + h as u64);
        for i in 0..spec.n_pairs {
            assert_pair_valid(&spec, i);
        }
    }
}

#[test]
fn dataset_is_balanced_and_reproducible() {
    let spec = ProxSpec::new(3, 60, 7);
    let ds = generate_dataset(&spec).unwrap();
    let ones = ds.graphs.iter().filter(|g| g.label == Some(GraphLabel::Class(1))).count();
    assert_eq!(ones * 2, ds.len());
    assert_eq!(spec_of(&ds), Some(spec.clone()));
    let mut a = Vec::new();
    let mut b = Vec::new();
    emit_jsonl(&ds, &mut a).unwrap();
    emit_jsonl(&generate_dataset(&spec).unwrap(), &mut b).unwrap();
    assert_eq!(a, b);
    let thirds: Vec<usize> = (0..60).map(|i| spec.red_count_for(i)).collect();
    for r in 1..=3 {
        assert_eq!(thirds.iter().filter(|&&c| c == r).count(), 20);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ProxSpec::new(1, 10, 0);
    assert!(generate_pairs(&spec).is_err());
    spec.n_pairs = 9;
    spec.levels = (5, 4);
    assert!(generate_pairs(&spec).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn violating_edges_match_trial_insertion(seed in any::<u64>(), h in 1usize..4) {
        let mut spec = ProxSpec::new(h, 3, seed);
        spec.levels = (h + 3, h + 6);
        spec.width = (2, 4);
        let p = gen_indexed_pair(&spec, 0).unwrap();
        let g = &p.positive;
        let fast: Vec<(usize, usize)> = violating_edges(g, h);
        let mut slow = Vec::new();
        for a in 0..g.node_count {
            for b in a + 1..g.node_count {
                if g.has_edge(a, b) {
                    continue;
                }
                let mut trial = g.clone();
                trial.edges.push(splab_core::Edge::new(a, b));
                if !check_label(&trial, h) {
                    slow.push((a, b));
                }
            }
        }
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn any_pair_index_is_valid(seed in any::<u64>(), index in 0usize..300) {
        let spec = ProxSpec::new(2, 300, seed);
        assert_pair_valid(&spec, index);
    }
}
