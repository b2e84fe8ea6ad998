use opinion_shift::dynamics::{integrate_transient, steady_state};
use opinion_shift::graph::{parse_edge_list, write_edge_list, LeaderConfig, LoadOptions, Model, Stubbornness};
use opinion_shift::selector::{bound_search, brute_force, SelectionProblem};
use opinion_shift::single_leader::{select_single, Heuristic, SingleLeaderProblem};
use opinion_shift::numerics::DenseVector;
use proptest::prelude::*;

const RING: &str = "\
# two triangles joined by a bridge
a b
b c
c a
c d 2.0
d e
e f
f d
";

#[test]
fn loaded_graph_select_then_simulate() {
    let g = parse_edge_list(RING, LoadOptions { undirected: true, dedupe: false }).unwrap();
    assert_eq!(g.node_count(), 6);
    let a = g.node_id("a").unwrap();
    let p = SelectionProblem::influenced(&g, vec![a], 0.5, 2, Stubbornness::uniform(6, 2.0).unwrap());
    let chosen = bound_search(&p).unwrap();
    let cfg = p.config(chosen.s1.clone());
    let ss = steady_state(&g, &cfg).unwrap();
    assert!((ss.mu - chosen.mu).abs() < 1e-12);
    // the ODE settles on the same steady state
    let traj = integrate_transient(&g, &cfg, &DenseVector::from_element(6, 0.5), 60.0, 0.02).unwrap();
    assert!((traj.terminal() - &ss.x_hat).amax() < 1e-6);
    // bound search is never better than exhaustive search
    let (_, mu_star) = brute_force(&p).unwrap();
    assert!((mu_star - 0.5).abs() <= chosen.f + 1e-12);
}

#[test]
fn edge_list_round_trip_preserves_steady_state() {
    let g = parse_edge_list(RING, LoadOptions { undirected: true, dedupe: false }).unwrap();
    // written lines already carry both directions
    let back = parse_edge_list(&write_edge_list(&g), LoadOptions::default()).unwrap();
    assert_eq!(back.labels(), g.labels());
    let cfg = LeaderConfig::absolute(vec![0], vec![5]);
    assert_eq!(steady_state(&g, &cfg).unwrap().x_hat, steady_state(&back, &cfg).unwrap().x_hat);
    // one direction only: d, e, f cannot reach a, b, c
    let directed = parse_edge_list(RING, LoadOptions::default()).unwrap();
    assert!(steady_state(&directed, &cfg).is_err());
}

#[test]
fn single_leader_optimum_beats_every_heuristic() {
    let g = parse_edge_list(RING, LoadOptions { undirected: true, dedupe: false }).unwrap();
    for model in [Model::Absolute, Model::Influenced] {
        let problem = || SingleLeaderProblem {
            graph: &g,
            s0: 0,
            alpha: 0.3,
            model,
            kappa: (model == Model::Influenced).then(|| Stubbornness::uniform(6, 1.0).unwrap()),
            candidates: None,
        };
        let best = select_single(problem(), Heuristic::Optimal).unwrap();
        for h in [Heuristic::Ds, Heuristic::Er, Heuristic::Dsk, Heuristic::Random(4)] {
            assert!(best.report.f <= select_single(problem(), h).unwrap().report.f + 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn opinions_stay_between_party_values(seed in 0u64..200, kappa in 0.05f64..20.0) {
        let g = opinion_shift::generate::random_digraph(7, 0.3, seed).unwrap();
        let cfg = LeaderConfig::influenced(vec![1], vec![4, 6], Stubbornness::uniform(7, kappa).unwrap());
        let ss = steady_state(&g, &cfg).unwrap();
        prop_assert!(ss.x_hat.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        let abs = steady_state(&g, &LeaderConfig::absolute(vec![1], vec![4, 6])).unwrap();
        prop_assert!(abs.x_hat[4] == 1.0 && abs.x_hat[1] == 0.0);
    }
}
