use ghsf::engine::{self, AcceptBranching, EngineConfig, NodeState, Simulation, TransportMode, WeightMode};
use ghsf::graph::{preprocess, Edge, EdgeList, EdgeState, GraphKind};
use ghsf::oracle::{forests_equal, kruskal_msf};
use ghsf::protocol::{MessageKind, WireMode};

fn cfg(workers: usize, seed: u64) -> EngineConfig {
    EngineConfig { num_workers: workers, seed, quiescence_interval: 16, ..EngineConfig::default() }
}

fn finished(g: &EdgeList, c: &EngineConfig) -> Simulation {
    let mut sim = Simulation::new(g, c).unwrap();
    sim.run_until_done().unwrap();
    sim
}

#[test]
fn two_vertices_merge_into_level_one_core() {
    let g = EdgeList::new(2, vec![Edge::new(0, 1, 0.3)]);
    for workers in [1, 2] {
        let sim = finished(&g, &cfg(workers, 3));
        for v in 0..2 {
            let s = sim.vertex_state(v).unwrap();
            assert_eq!(s.level, 1);
            assert_eq!(s.identity.w, 0.3);
            assert_eq!(s.node_state, NodeState::Found);
        }
        let r = sim.into_report().unwrap();
        assert_eq!(r.messages.get(MessageKind::Connect), 2);
        assert_eq!(r.halted_cores, 2);
    }
}

#[test]
fn triangle() {
    let g = EdgeList::new(3, vec![Edge::new(0, 1, 0.1), Edge::new(1, 2, 0.2), Edge::new(0, 2, 0.3)]);
    for workers in [1, 3] {
        let r = engine::run(&g, &cfg(workers, 0)).unwrap();
        assert_eq!(r.forest.edges, vec![Edge::new(0, 1, 0.1), Edge::new(1, 2, 0.2)]);
        assert_eq!(r.forest_weight.to_string(), "0.3000000000000000166533453693773481063544750213623046875");
    }
}

#[test]
fn wakeup_branches_the_lightest_edge() {
    let g = EdgeList::new(3, vec![Edge::new(0, 1, 0.7), Edge::new(0, 2, 0.3)]);
    let mut sim = Simulation::new(&g, &cfg(3, 0)).unwrap();
    sim.step_worker(0).unwrap();
    assert_eq!(sim.edge_state(0, 2), Some(EdgeState::Branch));
    assert_eq!(sim.edge_state(0, 1), Some(EdgeState::Basic));
    assert_eq!(sim.vertex_state(0).unwrap().node_state, NodeState::Found);
    assert_eq!(sim.vertex_state(1).unwrap().node_state, NodeState::Sleeping);
}

#[test]
fn isolated_vertices_send_nothing() {
    let g = EdgeList::new(4, vec![Edge::new(1, 2, 0.5)]);
    let sim = finished(&g, &cfg(2, 0));
    for v in [0, 3] {
        let s = sim.vertex_state(v).unwrap();
        assert_eq!((s.node_state, s.level), (NodeState::Found, 0));
    }
    let r = sim.into_report().unwrap();
    assert_eq!(r.forest.len(), 1);
    // Two Connects, two Initiates, then one Test/Reject-free find phase.
    assert_eq!(r.messages.get(MessageKind::Connect), 2);
}

#[test]
fn path_fragment_agrees_on_level_and_identity() {
    let g = EdgeList::new(3, vec![Edge::new(0, 1, 0.1), Edge::new(1, 2, 0.2)]);
    for seed in 0..20 {
        let sim = finished(&g, &cfg(3, seed));
        let states: Vec<_> = (0..3).map(|v| sim.vertex_state(v).unwrap().clone()).collect();
        assert!(states.iter().all(|s| s.level == states[0].level && s.identity == states[0].identity));
    }
}

/// Fragments {0,1} and {2,3} meet over 1-2 at level 1. In the level-2 find
/// phase 0 probes 0-3 while 3 probes 1-3 first, so 0's Test either finds 3
/// busy on another edge (Reject) or already probing 0-3 (crossing Tests).
fn square() -> EdgeList {
    EdgeList::new(
        4,
        vec![
            Edge::new(0, 1, 0.1),
            Edge::new(2, 3, 0.2),
            Edge::new(1, 2, 0.3),
            Edge::new(1, 3, 0.8),
            Edge::new(0, 3, 0.9),
        ],
    )
}

#[test]
fn crossing_tests_need_no_reject() {
    let g = square();
    let mut rejects_seen = [0usize; 2];
    for seed in 0..200 {
        let sim = finished(&g, &cfg(4, seed));
        assert_eq!(sim.edge_state(0, 3), Some(EdgeState::Rejected));
        assert_eq!(sim.edge_state(3, 0), Some(EdgeState::Rejected));
        let r = sim.into_report().unwrap();
        assert!(forests_equal(&r.forest, &kruskal_msf(&g).edges));
        let rejects = r.messages.get(MessageKind::Reject) as usize;
        assert!(rejects <= 1, "seed {seed}: {rejects} rejects");
        rejects_seen[rejects] += 1;
    }
    // Both interleavings occur: the Tests cross, or one arrives first.
    assert!(rejects_seen[0] > 0 && rejects_seen[1] > 0, "{rejects_seen:?}");
}

#[test]
fn connects_and_tests_get_deferred() {
    let g = preprocess(GraphKind::Rmat.generate(6, 8, 1).unwrap());
    let (mut main, mut tests) = (0, 0);
    for seed in 0..10 {
        let r = engine::run(&g, &cfg(4, seed)).unwrap();
        assert!(forests_equal(&r.forest, &kruskal_msf(&g).edges));
        main += r.deferred_main;
        tests += r.deferred_tests;
    }
    assert!(main > 0 && tests > 0);
}

#[test]
fn non_forest_edges_end_rejected_on_both_sides() {
    let g = preprocess(GraphKind::Uniform.generate(6, 8, 5).unwrap());
    let sim = finished(&g, &cfg(4, 5));
    let oracle = kruskal_msf(&g);
    for e in &g.edges {
        let want = if oracle.edges.edges.iter().any(|f| f.endpoints() == e.endpoints()) {
            EdgeState::Branch
        } else {
            EdgeState::Rejected
        };
        assert_eq!(sim.edge_state(e.u, e.v), Some(want), "{e:?}");
        assert_eq!(sim.edge_state(e.v, e.u), Some(want), "{e:?}");
    }
}

#[test]
fn rmat_ten_on_four_workers_matches_kruskal() {
    let g = preprocess(GraphKind::Rmat.generate(10, 32, 2).unwrap());
    let r = engine::run(&g, &cfg(4, 2)).unwrap();
    let oracle = kruskal_msf(&g);
    assert!(forests_equal(&r.forest, &oracle.edges));
    assert_eq!(r.forest_weight, oracle.weight);
    assert!(r.violations.is_empty());
}

#[test]
fn threaded_transport_matches_kruskal() {
    let g = preprocess(GraphKind::Ssca2.generate(9, 32, 4).unwrap());
    for workers in [1, 3, 8] {
        let c = EngineConfig { transport: TransportMode::Threaded, quiescence_interval: 1000, ..cfg(workers, 0) };
        let r = engine::run(&g, &c).unwrap();
        assert!(forests_equal(&r.forest, &kruskal_msf(&g).edges), "{workers} workers");
        assert!(r.trace_digest.is_none());
    }
}

#[test]
fn deterministic_runs_repeat_exactly() {
    let g = preprocess(GraphKind::Uniform.generate(7, 16, 9).unwrap());
    let a = engine::run(&g, &cfg(4, 9)).unwrap();
    let b = engine::run(&g, &cfg(4, 9)).unwrap();
    let c = engine::run(&g, &cfg(4, 10)).unwrap();
    assert_eq!(a.trace_digest, b.trace_digest);
    assert_eq!(a.messages, b.messages);
    assert_eq!(a.forest, b.forest);
    assert_ne!(a.trace_digest, c.trace_digest);
    assert_eq!(a.forest, c.forest);
}

#[test]
fn duplicate_weights_force_wide_tie_breakers() {
    // Both edges at worker 0 weigh 0.5.
    let g = EdgeList::new(4, vec![Edge::new(0, 2, 0.5), Edge::new(1, 3, 0.5), Edge::new(0, 1, 0.25)]);
    let c = EngineConfig { weight_mode: WeightMode::Compressed, ..cfg(2, 0) };
    let r = engine::run(&g, &c).unwrap();
    assert_eq!(r.wire_mode, WireMode::Wide);
    assert!(r.wire_mode_fallback);
    assert!(forests_equal(&r.forest, &kruskal_msf(&g).edges));
}

#[test]
fn literal_accept_branching_diverges() {
    // Marking an edge Branch as soon as it is accepted leaves extra Branch
    // edges whenever another subtree reports a lighter candidate.
    let mut diverged = 0;
    for seed in 0..20 {
        let g = preprocess(GraphKind::Uniform.generate(6, 8, seed).unwrap());
        let c = EngineConfig { accept_branching: AcceptBranching::OnAccept, max_steps: 200_000, ..cfg(4, seed) };
        match engine::run(&g, &c) {
            Ok(r) if forests_equal(&r.forest, &kruskal_msf(&g).edges) => {}
            _ => diverged += 1,
        }
        let classic = engine::run(&g, &cfg(4, seed)).unwrap();
        assert!(forests_equal(&classic.forest, &kruskal_msf(&g).edges));
    }
    assert!(diverged > 0);
}

#[test]
fn invalid_inputs_are_rejected_up_front() {
    let loops = EdgeList::new(2, vec![Edge::new(1, 1, 0.5)]);
    assert!(engine::run(&loops, &cfg(1, 0)).is_err());
    let g = EdgeList::new(2, vec![Edge::new(0, 1, 0.5)]);
    assert!(engine::run(&g, &cfg(3, 0)).is_err());
    assert!(engine::run(&g, &EngineConfig { sending_frequency: 0, ..cfg(1, 0) }).is_err());
}

#[test]
fn step_limit_reports_non_termination() {
    let g = preprocess(GraphKind::Rmat.generate(6, 8, 1).unwrap());
    let c = EngineConfig { max_steps: 50, ..cfg(2, 0) };
    assert!(matches!(engine::run(&g, &c), Err(engine::EngineError::StepLimit(_))));
}
