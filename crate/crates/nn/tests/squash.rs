mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splab_core::hops::{all_pairs_distances, Distance, HopAdjacency, HopIndex};
use splab_core::Graph;
use splab_nn::squash::{
    adjacency_power_entry, decay_curve, empirical_jacobian, layered_graph, mixed_power_entry, probe_input,
    Activation, DecaySettings, ProbeModel,
};
use splab_nn::{InputEncoding, Model, ModelConfig, ModelKind};

use common::random_graph;

fn cycle(n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::from_edges(n, &edges).unwrap()
}

fn model(kind: ModelKind, k: usize, layers: usize, seed: u64) -> Model {
    let mut cfg = ModelConfig::new(kind, InputEncoding::Colors { count: 1 }, 4, layers, k, 1);
    cfg.relations = 1;
    Model::new(cfg, seed).unwrap()
}

#[test]
fn eight_cycle_second_hop_entries() {
    let g = cycle(8);
    let adj = HopAdjacency::build(&HopIndex::build(&g, 2));
    for u in 0..8 {
        assert!((adjacency_power_entry(&adj, 2, 1, u, (u + 2) % 8) - 1.0 / 3.0).abs() < 1e-15);
        assert!((adjacency_power_entry(&adj, 2, 1, u, u) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(adjacency_power_entry(&adj, 2, 1, u, (u + 1) % 8), 0.0);
    }
}

#[test]
fn under_reaching_and_direct_reach() {
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let h0 = probe_input(3, 4, 1);
    let mpnn = model(ModelKind::Spn, 1, 1, 2);
    assert_eq!(empirical_jacobian(&mpnn, &g, 0, 2, 1, &h0), 0.0);
    for k in 2..=4 {
        let spn = model(ModelKind::Spn, k, 1, 2);
        assert!(empirical_jacobian(&spn, &g, 0, 2, 1, &h0) > 0.0, "k = {k}");
    }
}

#[test]
fn identity_probe_matches_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_graph(&mut rng, 8, 0.35, 1, 1);
    let weights = vec![0.5, -0.3, 0.2];
    let probe = ProbeModel::new(weights.clone(), 0.8, Activation::Identity, 2);
    let adj = HopAdjacency::build(&HopIndex::build(&g, 3));
    let h0 = probe_input(8, 2, 0);
    for (u, v) in [(0, 7), (2, 5), (4, 4)] {
        let exact = 2f64.sqrt() * 0.64 * mixed_power_entry(&adj, &weights, 2, u, v).abs();
        let norm = empirical_jacobian(&probe, &g, u, v, 2, &h0);
        assert!((norm - exact).abs() < 1e-14, "({u}, {v}): {norm} vs {exact}");
    }
}

#[test]
fn zero_before_reach_for_local_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let kinds = [
        (ModelKind::Spn, 1),
        (ModelKind::Spn, 2),
        (ModelKind::Spn, 3),
        (ModelKind::Rspn, 2),
        (ModelKind::GinBaseline, 1),
        (ModelKind::GcnBaseline, 1),
        (ModelKind::GatBaseline, 1),
    ];
    let mut checked = 0;
    for trial in 0..12 {
        let g = random_graph(&mut rng, 9, 0.25, 1, 1);
        let dist = all_pairs_distances(&g);
        let h0 = probe_input(9, 4, trial);
        for &(kind, k) in &kinds {
            let m = model(kind, k, 3, trial);
            for layers in 1..=3 {
                for v in 1..9 {
                    let reach = match dist[0][v] {
                        Distance::Finite(d) => layers * k < d,
                        Distance::Infinite => true,
                    };
                    if reach {
                        assert_eq!(empirical_jacobian(&m, &g, 0, v, layers, &h0), 0.0, "{kind:?} k={k} T={layers} v={v}");
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 100, "only {checked} unreachable pairs exercised");
}

#[test]
fn probe_norms_respect_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..30 {
        let n = 4 + trial % 7;
        let g = random_graph(&mut rng, n, 0.4, 1, 1);
        let k = 1 + trial % 3;
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let beta = rng.gen_range(0.5..1.5);
        let dim = 1 + trial % 3;
        let probe = ProbeModel::new(weights, beta, Activation::Tanh, dim);
        let h0 = probe_input(n, dim, trial as u64);
        for layers in 1..=3 {
            for v in 0..n {
                let norm = empirical_jacobian(&probe, &g, 0, v, layers, &h0);
                let bound = probe.bound(&g, layers, 0, v);
                assert!(norm <= bound + 1e-9, "trial {trial}: {norm} > {bound}");
            }
        }
    }
}

#[test]
fn layered_graph_levels_sit_at_their_distance() {
    let g = layered_graph(11, 5);
    let dist = all_pairs_distances(&g);
    for level in 0..11 {
        assert_eq!(dist[0][level * 5], Distance::Finite(level));
    }
}

#[test]
fn decay_curve_shapes() {
    let rows = decay_curve(&DecaySettings::default());
    let series = |name: &str| -> Vec<f64> { rows.iter().filter(|r| r.model == name).map(|r| r.norm).collect() };
    let (mpnn, spn, probe) = (series("mpnn"), series("spn"), series("probe-mpnn"));
    assert_eq!(mpnn.len(), 10);
    assert!(mpnn[0] > 0.0 && spn[0] > 0.0);
    assert!(spn[9] > mpnn[9]);
    assert!(mpnn[9] < mpnn[0]);
    assert!(probe.windows(2).all(|w| w[1] < w[0]), "{probe:?}");
    for row in rows.iter().filter(|r| r.bound.is_some()) {
        assert!(row.norm <= row.bound.unwrap() + 1e-9);
    }
}
