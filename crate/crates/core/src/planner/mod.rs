//! Anytime batch informed planner.
//!
//! Each batch prunes samples that cannot improve the incumbent, draws new
//! informed samples (keeping the invalid ones as negative charges), computes
//! a collision-unchecked reverse heuristic over the connection graph and runs
//! a best-first forward edge search from the start. The neighbour operation
//! used by the forward search is either the force-oriented elliptical query
//! or a plain spherical k-nearest query.

pub mod clock;
pub mod config;
pub mod tree;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::Result;
use crate::force::Polarity;
use crate::knn::{get_best_ellipse_k_nearest, RefineParams, SampleRef, SampleSet, ShapeParams};
use crate::space::{dist, informed_measure, InformedSet, RggParams, Sampler, State};

pub use clock::PlannerClock;
pub use config::{ClockMode, NeighborMode, PlannerConfig};
pub use tree::{extract_path, EdgeCache, ForwardTree, Solution, TreeView};

/// Valid-sample index of the start state.
pub const START: usize = 0;
/// Valid-sample index of the goal state.
pub const GOAL: usize = 1;

// Slack on the informed pruning bound so that vertices of the incumbent
// path survive rounding.
const PRUNE_SLACK: f64 = 1e-12;

/// Work counters for one planner run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerStats {
    pub batches: u64,
    pub samples_drawn: u64,
    pub invalid_samples_drawn: u64,
    pub samples_pruned: u64,
    pub invalid_evicted: u64,
    pub state_checks: u64,
    pub motion_checks: u64,
    pub edges_processed: u64,
    pub edges_blacklisted: u64,
    pub neighbor_queries: u64,
    pub refinement_iterations: u64,
    pub distance_evaluations: u64,
    pub node_visits: u64,
    pub queue_operations: u64,
    pub relaxations: u64,
    /// Sum of `N log2 N` over index rebuilds.
    pub index_work: f64,
    /// Pair-force terms evaluated during refinement.
    pub force_terms: u64,
}

/// Why a batch ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchStatus {
    /// The forward search ran out of improving edges.
    Exhausted,
    /// The time budget expired.
    OutOfTime,
}

#[derive(Debug)]
struct QueuedEdge {
    key: f64,
    effort: f64,
    heuristic: f64,
    source_id: u64,
    target_id: u64,
    source: usize,
    target: usize,
}

impl QueuedEdge {
    fn order(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.effort.total_cmp(&other.effort))
            .then(self.heuristic.total_cmp(&other.heuristic))
            .then(self.source_id.cmp(&other.source_id))
            .then(self.target_id.cmp(&other.target_id))
    }
}

impl PartialEq for QueuedEdge {
    fn eq(&self, other: &Self) -> bool {
        self.order(other) == Ordering::Equal
    }
}

impl Eq for QueuedEdge {}

impl PartialOrd for QueuedEdge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueuedEdge {
    // reversed so that the max-heap pops the smallest key
    fn cmp(&self, other: &Self) -> Ordering {
        other.order(self)
    }
}

/// Everything a finished run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    /// Strictly improving solutions in emission order.
    pub solutions: Vec<Solution>,
    pub stats: PlannerStats,
    /// Planner time at termination.
    pub elapsed: f64,
}

impl PlanOutcome {
    pub fn first(&self) -> Option<&Solution> {
        self.solutions.first()
    }

    pub fn best(&self) -> Option<&Solution> {
        self.solutions.last()
    }

    pub fn succeeded(&self) -> bool {
        !self.solutions.is_empty()
    }
}

pub struct Planner<'e> {
    env: &'e Environment,
    config: PlannerConfig,
    rgg: RggParams,
    sampler: Sampler,
    samples: SampleSet,
    clock: PlannerClock,
    edges: EdgeCache,
    tree: ForwardTree,
    heuristic: Vec<f64>,
    heuristic_graph: Vec<Vec<usize>>,
    neighbor_cache: Vec<Option<Vec<usize>>>,
    radius: f64,
    k: usize,
    c_best: f64,
    solutions: Vec<Solution>,
    stats: PlannerStats,
    state_check_cost: f64,
    distance_cost: f64,
    out_of_time: bool,
}

impl<'e> Planner<'e> {
    pub fn new(env: &'e Environment, config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        let n = env.dimension();
        let rgg = config.rgg(n);
        rgg.validate()?;
        let mut samples = SampleSet::new(n);
        samples.insert_valid(env.start().coords())?;
        samples.insert_valid(env.goal().coords())?;
        let state_check_cost = clock::cost::STATE_CHECK_BASE
            + clock::cost::STATE_CHECK_PER_OBSTACLE_AXIS * (env.obstacles().len() * n) as f64;
        let distance_cost = clock::cost::DISTANCE;
        Ok(Planner {
            env,
            sampler: Sampler::new(env.bounds().clone(), config.seed),
            clock: PlannerClock::start(config.clock),
            rgg,
            samples,
            edges: EdgeCache::default(),
            tree: ForwardTree::new(2, START),
            heuristic: vec![f64::INFINITY, 0.0],
            heuristic_graph: vec![Vec::new(); 2],
            neighbor_cache: vec![None; 2],
            radius: f64::INFINITY,
            k: 1,
            c_best: f64::INFINITY,
            solutions: Vec::new(),
            stats: PlannerStats::default(),
            state_check_cost,
            distance_cost,
            out_of_time: false,
            config,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn environment(&self) -> &Environment {
        self.env
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn tree(&self) -> &ForwardTree {
        &self.tree
    }

    pub fn edge_cache(&self) -> &EdgeCache {
        &self.edges
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn stats(&self) -> &PlannerStats {
        &self.stats
    }

    pub fn c_best(&self) -> f64 {
        self.c_best
    }

    /// Connection radius and neighbour count of the current batch.
    pub fn connection(&self) -> (f64, usize) {
        (self.radius, self.k)
    }

    pub fn heuristic(&self, v: usize) -> f64 {
        self.heuristic[v]
    }

    pub fn heuristic_values(&self) -> &[f64] {
        &self.heuristic
    }

    /// Undirected adjacency of the graph used for the reverse heuristic.
    pub fn heuristic_graph(&self) -> &[Vec<usize>] {
        &self.heuristic_graph
    }

    /// Forward-search neighbours computed for `v` in the current batch.
    pub fn cached_neighbors(&self, v: usize) -> Option<&[usize]> {
        self.neighbor_cache.get(v).and_then(|c| c.as_deref())
    }

    pub fn elapsed(&self) -> f64 {
        self.clock.elapsed()
    }

    pub fn is_out_of_time(&self) -> bool {
        self.out_of_time
    }

    fn check_time(&mut self) -> bool {
        if !self.out_of_time && self.clock.elapsed() >= self.config.time_budget {
            self.out_of_time = true;
        }
        self.out_of_time
    }

    fn charge_distances(&mut self, count: u64) {
        self.stats.distance_evaluations += count;
        self.clock.charge(count as f64 * self.distance_cost);
    }

    fn charge_index_evaluations(&mut self) {
        let count = self.samples.take_evaluations();
        self.charge_distances(count);
        let boxes = self.samples.take_node_visits();
        self.stats.node_visits += boxes;
        self.clock
            .charge(boxes as f64 * clock::cost::NODE_VISIT_PER_AXIS * self.env.dimension() as f64);
    }

    fn charge_queue(&mut self, ops: u64) {
        self.stats.queue_operations += ops;
        self.clock.charge(ops as f64 * clock::cost::QUEUE_OP);
    }

    fn informed_set(&self) -> Result<InformedSet> {
        InformedSet::new(
            self.env.start().clone(),
            self.env.goal().clone(),
            self.c_best,
        )
    }

    /// One full batch: prune, sample, reverse heuristic, forward search.
    pub fn run_batch(&mut self) -> Result<BatchStatus> {
        if self.check_time() {
            return Ok(BatchStatus::OutOfTime);
        }
        self.stats.batches += 1;
        self.prune()?;
        if self.sample_batch()? == BatchStatus::OutOfTime {
            return Ok(BatchStatus::OutOfTime);
        }
        self.samples.rebuild_index();
        let total = self.samples.len() as f64;
        let work = total * total.max(2.0).log2();
        self.stats.index_work += work;
        self.clock.charge(clock::cost::INDEX_BUILD * work);
        let q = self.samples.len_valid();
        let measure = informed_measure(&self.informed_set()?, self.env.bounds());
        self.radius = self.rgg.radius(q, measure)? * self.rgg.rewire_factor;
        self.k = self.rgg.k(q)?;
        if self.update_reverse_heuristic() == BatchStatus::OutOfTime {
            return Ok(BatchStatus::OutOfTime);
        }
        self.forward_search()
    }

    /// Drops samples whose straight-line cost bound exceeds the incumbent.
    fn prune(&mut self) -> Result<()> {
        if !self.c_best.is_finite() {
            return Ok(());
        }
        let set = self.informed_set()?;
        let bound = self.c_best * (1.0 + PRUNE_SLACK);
        let before = self.samples.len();
        self.samples.retain(|r, p| {
            matches!(r, SampleRef::Valid(START) | SampleRef::Valid(GOAL))
                || set.cost_lower_bound(p) <= bound
        });
        self.charge_distances(2 * before as u64);
        self.stats.samples_pruned += (before - self.samples.len()) as u64;
        Ok(())
    }

    fn sample_batch(&mut self) -> Result<BatchStatus> {
        let set = self.informed_set()?;
        let n = self.env.dimension();
        for _ in 0..self.config.batch_size {
            if self.check_time() {
                return Ok(BatchStatus::OutOfTime);
            }
            let x = self.sampler.sample_informed(&set)?;
            let valid = self.env.is_state_valid(x.coords());
            self.clock
                .charge(clock::cost::SAMPLE_PER_AXIS * n as f64 + self.state_check_cost);
            self.stats.samples_drawn += 1;
            self.stats.state_checks += 1;
            if !valid {
                self.stats.invalid_samples_drawn += 1;
            }
            self.samples
                .insert(x.coords(), Polarity::from_validity(valid))?;
        }
        let evicted = self
            .samples
            .evict_oldest_invalid(self.config.invalid_capacity());
        self.stats.invalid_evicted += evicted as u64;
        Ok(BatchStatus::Exhausted)
    }

    /// Shortest-path cost to the goal over the spherical connection graph
    /// without collision checks; known-invalid edges are left out.
    pub fn update_reverse_heuristic(&mut self) -> BatchStatus {
        let n = self.samples.len_valid();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for v in 0..n {
            if v % 32 == 0 && self.check_time() {
                return BatchStatus::OutOfTime;
            }
            let near =
                self.samples
                    .spherical_knn(self.samples.valid(v), self.k, self.radius, Some(v));
            self.clock.charge(clock::cost::NEIGHBOR_QUERY);
            self.stats.neighbor_queries += 1;
            for nb in near {
                if let SampleRef::Valid(u) = nb.sample {
                    if self
                        .edges
                        .is_invalid(self.samples.valid_id(v), self.samples.valid_id(u))
                    {
                        continue;
                    }
                    adjacency[v].push(u);
                    adjacency[u].push(v);
                }
            }
            self.charge_index_evaluations();
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let (heuristic, relaxations) = shortest_paths_to(&adjacency, GOAL, |a, b| {
            dist(self.samples.valid(a), self.samples.valid(b))
        });
        self.stats.relaxations += relaxations;
        self.clock
            .charge(relaxations as f64 * clock::cost::RELAXATION);
        self.charge_distances(relaxations);
        self.heuristic = heuristic;
        self.heuristic_graph = adjacency;
        if self.check_time() {
            BatchStatus::OutOfTime
        } else {
            BatchStatus::Exhausted
        }
    }

    /// Best-first edge search from the start over the current samples.
    pub fn forward_search(&mut self) -> Result<BatchStatus> {
        let n = self.samples.len_valid();
        self.tree = ForwardTree::new(n, START);
        self.neighbor_cache = vec![None; n];
        let mut queue = BinaryHeap::new();
        self.expand(START, &mut queue)?;
        loop {
            if self.check_time() {
                return Ok(BatchStatus::OutOfTime);
            }
            let Some(edge) = queue.pop() else {
                return Ok(BatchStatus::Exhausted);
            };
            self.charge_queue(1);
            if edge.key >= self.c_best {
                return Ok(BatchStatus::Exhausted);
            }
            let (s, t) = (edge.source, edge.target);
            let cost = dist(self.samples.valid(s), self.samples.valid(t));
            self.charge_distances(1);
            if self.tree.g(s) + cost >= self.tree.g(t) {
                continue;
            }
            self.stats.edges_processed += 1;
            if !self.edge_is_valid(s, t) {
                continue;
            }
            let changed = self.tree.reparent(t, s, &self.samples);
            self.charge_distances(changed.len() as u64);
            if self.tree.g(GOAL) < self.c_best {
                self.emit()?;
            }
            for v in changed {
                self.expand(v, &mut queue)?;
            }
        }
    }

    fn emit(&mut self) -> Result<()> {
        let solution = extract_path(&self.tree, &self.samples, GOAL, self.clock.elapsed())?;
        self.c_best = solution.cost;
        self.solutions.push(solution);
        Ok(())
    }

    fn edge_is_valid(&mut self, s: usize, t: usize) -> bool {
        let (a, b) = (self.samples.valid_id(s), self.samples.valid_id(t));
        if let Some(known) = self.edges.lookup(a, b) {
            return known;
        }
        let (ok, checked) = self.env.motion_check(
            self.samples.valid(s),
            self.samples.valid(t),
            self.env.check_resolution(),
        );
        // Corner clips between check points are caught exactly.
        let ok = ok
            && self
                .env
                .segment_clear(self.samples.valid(s), self.samples.valid(t));
        self.stats.motion_checks += 1;
        self.stats.state_checks += checked;
        self.clock
            .charge((checked + 1) as f64 * self.state_check_cost);
        self.edges.record(a, b, ok);
        if !ok {
            self.stats.edges_blacklisted += 1;
        }
        ok
    }

    fn expand(&mut self, v: usize, queue: &mut BinaryHeap<QueuedEdge>) -> Result<()> {
        let neighbors = self.neighbors(v)?;
        let g = self.tree.g(v);
        let resolution = self.env.check_resolution();
        let source_id = self.samples.valid_id(v);
        let mut evaluated = 0;
        let mut pushed = 0;
        for &t in &neighbors {
            if t == v || t == START {
                continue;
            }
            let cost = dist(self.samples.valid(v), self.samples.valid(t));
            evaluated += 1;
            let g_new = g + cost;
            if g_new >= self.tree.g(t) {
                continue;
            }
            let key = g_new + self.heuristic[t];
            if !(key < self.c_best) {
                continue;
            }
            let target_id = self.samples.valid_id(t);
            if self.edges.is_invalid(source_id, target_id) {
                continue;
            }
            queue.push(QueuedEdge {
                key,
                effort: if self.config.effort_tiebreak {
                    cost / resolution
                } else {
                    0.0
                },
                heuristic: self.heuristic[t],
                source_id,
                target_id,
                source: v,
                target: t,
            });
            pushed += 1;
        }
        self.charge_distances(evaluated);
        self.charge_queue(pushed);
        self.neighbor_cache[v] = Some(neighbors);
        Ok(())
    }

    fn neighbors(&mut self, v: usize) -> Result<Vec<usize>> {
        if let Some(cached) = self.neighbor_cache[v].take() {
            return Ok(cached);
        }
        self.stats.neighbor_queries += 1;
        self.clock.charge(clock::cost::NEIGHBOR_QUERY);
        let x = self.samples.valid(v).to_vec();
        let found = match self.config.neighbor_mode {
            NeighborMode::Spherical => self
                .samples
                .spherical_knn(&x, self.k, self.radius, Some(v))
                .into_iter()
                .filter_map(|nb| match nb.sample {
                    SampleRef::Valid(i) => Some(i),
                    SampleRef::Invalid(_) => None,
                })
                .collect(),
            NeighborMode::Elliptical => {
                let n = x.len();
                let params = RefineParams {
                    shape: ShapeParams::new(
                        self.radius,
                        self.config.gamma_max,
                        &self.config.charge,
                        n,
                    ),
                    loop_cap: self.config.loop_cap,
                    model: self.config.charge.with_rho0(self.radius),
                };
                let view = TreeView {
                    tree: &self.tree,
                    samples: &self.samples,
                    edges: &self.edges,
                };
                let refined =
                    get_best_ellipse_k_nearest(&x, Some(v), self.k, &self.samples, &view, &params)?;
                self.stats.refinement_iterations += refined.iterations as u64;
                self.stats.neighbor_queries += refined.iterations as u64;
                self.stats.force_terms += refined.force_terms as u64;
                self.clock
                    .charge(clock::cost::FORCE_PER_TERM_AXIS * (refined.force_terms * n) as f64);
                self.clock
                    .charge(clock::cost::NEIGHBOR_QUERY * refined.iterations as f64);
                refined.neighbors.valid
            }
        };
        self.charge_index_evaluations();
        Ok(found)
    }

    pub fn into_outcome(self) -> PlanOutcome {
        PlanOutcome {
            elapsed: self.clock.elapsed(),
            solutions: self.solutions,
            stats: self.stats,
        }
    }
}

/// Dijkstra from `target` over an undirected adjacency list. Returns the
/// cost table (infinite when unreachable) and the number of relaxations.
pub fn shortest_paths_to<F>(adjacency: &[Vec<usize>], target: usize, cost: F) -> (Vec<f64>, u64)
where
    F: Fn(usize, usize) -> f64,
{
    #[derive(PartialEq)]
    struct Entry(f64, usize);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
        }
    }

    let mut best = vec![f64::INFINITY; adjacency.len()];
    let mut relaxations = 0;
    if target >= adjacency.len() {
        return (best, 0);
    }
    best[target] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, target));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > best[v] {
            continue;
        }
        for &u in &adjacency[v] {
            relaxations += 1;
            let nd = d + cost(v, u);
            if nd < best[u] {
                best[u] = nd;
                heap.push(Entry(nd, u));
            }
        }
    }
    (best, relaxations)
}

/// Runs the planner until the budget expires, handing each improving
/// solution to `on_solution` as it is found.
pub fn plan_with<F>(
    env: &Environment,
    config: &PlannerConfig,
    mut on_solution: F,
) -> Result<PlanOutcome>
where
    F: FnMut(&Solution),
{
    let mut planner = Planner::new(env, config.clone())?;
    loop {
        let before = planner.solutions().len();
        let status = planner.run_batch()?;
        for s in &planner.solutions()[before..] {
            on_solution(s);
        }
        if status == BatchStatus::OutOfTime {
            break;
        }
        if let Some(max) = config.max_batches {
            if planner.stats().batches >= max as u64 {
                break;
            }
        }
    }
    Ok(planner.into_outcome())
}

/// Runs the planner to budget and returns every emitted solution.
pub fn plan(env: &Environment, config: &PlannerConfig) -> Result<PlanOutcome> {
    plan_with(env, config, |_| {})
}

/// Path length by re-summing segment lengths.
pub fn path_length(path: &[State]) -> f64 {
    path.windows(2)
        .map(|w| dist(w[0].coords(), w[1].coords()))
        .sum()
}
