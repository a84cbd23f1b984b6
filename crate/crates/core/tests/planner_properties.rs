use std::cmp::Ordering;
use std::collections::BinaryHeap;

use fdit::environment::{default_dividing_wall, make_dividing_wall, make_random_rectangles};
use fdit::planner::{path_length, BatchStatus, GOAL, START};
use fdit::space::dist;
use fdit::{plan, Environment, NeighborMode, Planner, PlannerConfig, Snapshot, State};
use proptest::prelude::*;

fn config(mode: NeighborMode, seed: u64, batches: usize) -> PlannerConfig {
    PlannerConfig {
        neighbor_mode: mode,
        seed,
        batch_size: 100,
        time_budget: 10.0,
        max_batches: Some(batches),
        ..PlannerConfig::default()
    }
}

fn free_world(n: usize) -> Environment {
    let mut start = vec![0.5; n];
    let mut goal = vec![0.5; n];
    start[0] = 0.1;
    goal[0] = 0.9;
    Environment::free(State::new(start), State::new(goal)).unwrap()
}

fn worlds() -> Vec<(&'static str, Environment)> {
    vec![
        ("dw2", default_dividing_wall(2).unwrap()),
        ("dw4", default_dividing_wall(4).unwrap()),
        ("rr2", make_random_rectangles(2, 20, (0.1, 0.3), 5).unwrap()),
        ("free3", free_world(3)),
    ]
}

fn check_solutions(env: &Environment, solutions: &[fdit::Solution]) {
    let fine = env.check_resolution() / 10.0;
    for w in solutions.windows(2) {
        assert!(w[1].cost < w[0].cost, "costs not strictly decreasing");
        assert!(w[1].time >= w[0].time);
    }
    for s in solutions {
        assert_eq!(s.path.first(), Some(env.start()));
        assert_eq!(s.path.last(), Some(env.goal()));
        for seg in s.path.windows(2) {
            assert!(
                env.is_motion_valid_at(seg[0].coords(), seg[1].coords(), fine),
                "unsound segment"
            );
        }
        assert!((path_length(&s.path) - s.cost).abs() <= 1e-12 * s.cost.max(1.0));
    }
}

#[test]
fn solutions_are_sound_and_improving() {
    for (name, env) in worlds() {
        for mode in [NeighborMode::Elliptical, NeighborMode::Spherical] {
            for seed in 0..3 {
                let out = plan(&env, &config(mode, seed, 6)).unwrap();
                assert!(out.succeeded(), "{name} {mode:?} seed {seed} found nothing");
                check_solutions(&env, &out.solutions);
            }
        }
    }
}

#[test]
fn tree_is_consistent_after_every_batch() {
    for (_, env) in worlds() {
        for mode in [NeighborMode::Elliptical, NeighborMode::Spherical] {
            let mut planner = Planner::new(&env, config(mode, 9, 5)).unwrap();
            for _ in 0..5 {
                planner.run_batch().unwrap();
                planner.tree().audit(planner.samples()).unwrap();
            }
        }
    }
}

#[test]
fn identical_inputs_give_identical_runs() {
    let env = default_dividing_wall(4).unwrap();
    for mode in [NeighborMode::Elliptical, NeighborMode::Spherical] {
        let a = plan(&env, &config(mode, 42, 5)).unwrap();
        let b = plan(&env, &config(mode, 42, 5)).unwrap();
        assert_eq!(a.solutions, b.solutions);
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.elapsed.to_bits(), b.elapsed.to_bits());
    }
}

#[test]
fn modes_coincide_without_obstacles() {
    for n in [2, 4] {
        let env = free_world(n);
        for seed in 0..4 {
            let sph = plan(&env, &config(NeighborMode::Spherical, seed, 3)).unwrap();
            for gamma_max in [0.0, 1.0] {
                let cfg = PlannerConfig {
                    gamma_max,
                    ..config(NeighborMode::Elliptical, seed, 3)
                };
                let ell = plan(&env, &cfg).unwrap();
                assert_eq!(ell.first().unwrap().cost, sph.first().unwrap().cost);
                let costs =
                    |o: &fdit::PlanOutcome| o.solutions.iter().map(|s| s.cost).collect::<Vec<_>>();
                assert_eq!(costs(&ell), costs(&sph));
            }
        }
    }
}

#[test]
fn sealed_wall_yields_no_solution() {
    let env = make_dividing_wall(2, &[], 0.1).unwrap();
    let out = plan(&env, &config(NeighborMode::Elliptical, 1, 4)).unwrap();
    assert!(out.solutions.is_empty());
    assert!(!out.succeeded());
}

#[test]
fn batch_accounting() {
    let env = default_dividing_wall(2).unwrap();
    let cfg = config(NeighborMode::Elliptical, 5, 8);
    let mut planner = Planner::new(&env, cfg.clone()).unwrap();
    assert_eq!(planner.samples().len(), 2);
    let mut batches = 0;
    loop {
        let before = planner.samples().len() as u64;
        let (pruned_before, evicted_before) = (
            planner.stats().samples_pruned,
            planner.stats().invalid_evicted,
        );
        let unbounded = !planner.c_best().is_finite();
        planner.run_batch().unwrap();
        batches += 1;
        let stats = planner.stats();
        let pruned = stats.samples_pruned - pruned_before;
        let evicted = stats.invalid_evicted - evicted_before;
        if unbounded {
            assert_eq!(pruned, 0);
        }
        assert_eq!(
            planner.samples().len() as u64,
            before + cfg.batch_size as u64 - pruned - evicted
        );
        for p in planner.samples().invalid_iter() {
            assert!(!env.is_state_valid(p));
        }
        for p in planner.samples().valid_iter() {
            assert!(env.is_state_valid(p));
        }
        if batches == 8 {
            break;
        }
    }
    assert_eq!(planner.stats().samples_drawn, 8 * cfg.batch_size as u64);
}

#[test]
fn first_batch_adds_exactly_one_batch_of_samples() {
    let env = default_dividing_wall(4).unwrap();
    let mut planner = Planner::new(&env, config(NeighborMode::Spherical, 3, 1)).unwrap();
    planner.run_batch().unwrap();
    assert_eq!(planner.samples().len(), 2 + 100);
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Plain Dijkstra over the exported graph.
fn dijkstra(points: &[Vec<f64>], edges: &[[usize; 2]], target: usize) -> Vec<f64> {
    let mut adj = vec![Vec::new(); points.len()];
    for &[a, b] in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut best = vec![f64::INFINITY; points.len()];
    best[target] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, target)]);
    while let Some(Item(d, v)) = heap.pop() {
        if d > best[v] {
            continue;
        }
        for &u in &adj[v] {
            let nd = d + dist(&points[v], &points[u]);
            if nd < best[u] {
                best[u] = nd;
                heap.push(Item(nd, u));
            }
        }
    }
    best
}

#[test]
fn heuristic_matches_independent_shortest_paths() {
    for (name, env) in worlds() {
        let mut planner = Planner::new(&env, config(NeighborMode::Elliptical, 17, 3)).unwrap();
        for _ in 0..3 {
            planner.run_batch().unwrap();
            let snap = Snapshot::from_planner(&planner);
            let want = dijkstra(&snap.valid_samples, &snap.heuristic_edges, GOAL);
            assert_eq!(snap.heuristic[GOAL], Some(0.0));
            for (h, w) in snap.heuristic.iter().zip(&want) {
                match h {
                    Some(h) => assert!((h - w).abs() <= 1e-12 * w.max(1.0), "{name}: {h} vs {w}"),
                    None => assert!(w.is_infinite()),
                }
            }
            if env.obstacles().is_empty() {
                for (p, h) in snap.valid_samples.iter().zip(&snap.heuristic) {
                    if let Some(h) = h {
                        assert!(*h >= dist(p, env.goal().coords()) - 1e-12);
                    }
                }
            }
        }
    }
}

/// After a batch ends with an empty queue, no examined valid edge out of an
/// expanded vertex can still lower a target's cost unless its key was
/// already outside the incumbent bound.
#[test]
fn forward_search_leaves_no_cheap_improvement() {
    for (name, env) in worlds() {
        for mode in [NeighborMode::Elliptical, NeighborMode::Spherical] {
            let mut planner = Planner::new(&env, config(mode, 23, 4)).unwrap();
            for _ in 0..4 {
                let status = planner.run_batch().unwrap();
                assert_eq!(status, BatchStatus::Exhausted);
                let tree = planner.tree();
                let samples = planner.samples();
                let c_best = planner.c_best();
                for v in tree.vertices() {
                    let Some(neighbors) = planner.cached_neighbors(v) else {
                        continue;
                    };
                    for &u in neighbors {
                        if u == START || u == v {
                            continue;
                        }
                        let known = planner
                            .edge_cache()
                            .lookup(samples.valid_id(v), samples.valid_id(u));
                        if known != Some(true) {
                            continue;
                        }
                        let via = tree.g(v) + dist(samples.valid(v), samples.valid(u));
                        if via < tree.g(u) - 1e-9 {
                            assert!(
                                via + planner.heuristic(u) >= c_best - 1e-9,
                                "{name} {mode:?}: edge {v}->{u} improves {} to {via}",
                                tree.g(u)
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn snapshot_round_trips() {
    let env = default_dividing_wall(2).unwrap();
    let mut planner = Planner::new(&env, config(NeighborMode::Elliptical, 2, 2)).unwrap();
    planner.run_batch().unwrap();
    planner.run_batch().unwrap();
    let snap = Snapshot::from_planner(&planner);
    assert_eq!(snap.invalid_samples.len(), planner.samples().len_invalid());
    let back = Snapshot::from_json(&snap.to_json().unwrap()).unwrap();
    assert_eq!(back, snap);
    for &[p, c] in &snap.tree_edges {
        let (gp, gc) = (snap.cost_to_come[p].unwrap(), snap.cost_to_come[c].unwrap());
        assert!((gp + dist(&snap.valid_samples[p], &snap.valid_samples[c]) - gc).abs() <= 1e-12);
    }
    let mut bad = serde_json::to_value(&snap).unwrap();
    bad["schema_version"] = serde_json::json!(99);
    assert!(Snapshot::from_json(&bad.to_string()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_worlds_keep_invariants(seed in 0u64..1000, world in 0u64..1000, n in 2usize..5, ell in any::<bool>()) {
        let env = make_random_rectangles(n, 10, (0.1, 0.3), world).unwrap();
        let mode = if ell { NeighborMode::Elliptical } else { NeighborMode::Spherical };
        let mut planner = Planner::new(&env, config(mode, seed, 3)).unwrap();
        for _ in 0..3 {
            planner.run_batch().unwrap();
            prop_assert!(planner.tree().audit(planner.samples()).is_ok());
        }
        check_solutions(&env, planner.solutions());
    }
}
