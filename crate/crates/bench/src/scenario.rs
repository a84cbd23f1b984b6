//! Named benchmark worlds and the scripted narrow-corridor refinement
//! scenario.

use std::path::Path;

use fdit::environment::{default_dividing_wall, make_random_rectangles};
use fdit::knn::{get_best_ellipse_k_nearest, NoTree, RefineParams, RefinedNeighbors, ShapeParams};
use fdit::{Bounds, ChargeModel, Environment, HyperRectangle, Polarity, SampleSet, Sampler, State};

use crate::error::{BenchError, Result};

pub const RANDOM_RECTANGLE_COUNT: usize = 20;

/// Per-axis rectangle width range for the random-rectangle world, keyed by
/// the smallest dimension it applies to. Wider boxes in higher dimensions
/// keep the occupied fraction of the cube from vanishing.
const RANDOM_RECTANGLE_WIDTHS: [(usize, (f64, f64)); 4] = [
    (2, (0.1, 0.3)),
    (4, (0.3, 0.5)),
    (8, (0.5, 0.7)),
    (16, (0.7, 0.85)),
];

pub fn random_rectangle_widths(dim: usize) -> (f64, f64) {
    RANDOM_RECTANGLE_WIDTHS
        .iter()
        .rev()
        .find(|(from, _)| *from <= dim)
        .map_or(RANDOM_RECTANGLE_WIDTHS[0].1, |(_, w)| *w)
}

/// Obstacle-free unit cube, start (0.1, 0.5, ...) and goal (0.9, 0.5, ...).
pub fn free_world(dim: usize) -> Result<Environment> {
    let mut start = vec![0.5; dim];
    let mut goal = vec![0.5; dim];
    if let (Some(s), Some(g)) = (start.first_mut(), goal.first_mut()) {
        *s = 0.1;
        *g = 0.9;
    }
    Ok(Environment::free(State::new(start), State::new(goal))?)
}

/// Resolves an environment id: `dw`, `rr`, `free`, or a path to an
/// environment file. `world_seed` only affects `rr`.
pub fn build_environment(id: &str, dim: usize, world_seed: u64) -> Result<Environment> {
    match id {
        "dw" => Ok(default_dividing_wall(dim)?),
        "rr" => Ok(make_random_rectangles(
            dim,
            RANDOM_RECTANGLE_COUNT,
            random_rectangle_widths(dim),
            world_seed,
        )?),
        "free" => free_world(dim),
        path if Path::new(path).is_file() => {
            let env = Environment::load(path)?;
            if env.dimension() != dim {
                return Err(fdit::FditError::DimensionMismatch {
                    expected: dim,
                    got: env.dimension(),
                }
                .into());
            }
            Ok(env)
        }
        other => Err(BenchError::UnknownEnvironment(other.to_string())),
    }
}

/// A 2-D corridor of the given width running along the first axis from
/// x = 0.2 to x = 0.7, centred on y = 0.5. Everything else in that x-range
/// is blocked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorridorScenario {
    pub width: f64,
    pub samples: usize,
    pub k: usize,
    pub gamma_max: f64,
    pub loop_cap: usize,
}

impl Default for CorridorScenario {
    fn default() -> Self {
        CorridorScenario {
            width: 0.06,
            samples: 600,
            k: 12,
            gamma_max: 1.0,
            loop_cap: 5,
        }
    }
}

pub const CORRIDOR_ENTRY: f64 = 0.2;
pub const CORRIDOR_EXIT: f64 = 0.7;

impl CorridorScenario {
    pub fn environment(&self) -> Result<Environment> {
        let half = self.width / 2.0;
        let walls = vec![
            HyperRectangle::new(vec![CORRIDOR_ENTRY, 0.0], vec![CORRIDOR_EXIT, 0.5 - half])?,
            HyperRectangle::new(vec![CORRIDOR_ENTRY, 0.5 + half], vec![CORRIDOR_EXIT, 1.0])?,
        ];
        Ok(Environment::new(
            Bounds::unit(2),
            walls,
            State::new(vec![0.1, 0.5]),
            State::new(vec![0.9, 0.5]),
            fdit::environment::DEFAULT_CHECK_RESOLUTION,
        )?)
    }

    /// Radius whose disc holds `k` samples on average, doubled in area.
    pub fn radius(&self) -> f64 {
        (2.0 * self.k as f64 / (std::f64::consts::PI * self.samples as f64)).sqrt()
    }

    /// Query state: on the corridor axis, half a radius past the entry.
    pub fn query(&self) -> [f64; 2] {
        [CORRIDOR_ENTRY + 0.5 * self.radius(), 0.5]
    }

    /// One refinement run over a fresh uniform sample set.
    pub fn trial(&self, seed: u64) -> Result<RefinedNeighbors> {
        let env = self.environment()?;
        let mut sampler = Sampler::new(Bounds::unit(2), seed);
        let mut set = SampleSet::new(2);
        for _ in 0..self.samples {
            let p = sampler.sample_uniform();
            set.insert(
                p.coords(),
                Polarity::from_validity(env.is_state_valid(p.coords())),
            )?;
        }
        set.rebuild_index();
        let model = ChargeModel::default();
        let params = RefineParams {
            shape: ShapeParams::new(self.radius(), self.gamma_max, &model, 2),
            loop_cap: self.loop_cap,
            model,
        };
        Ok(get_best_ellipse_k_nearest(
            &self.query(),
            None,
            self.k,
            &set,
            &NoTree,
            &params,
        )?)
    }

    pub fn run(&self, trials: u64, base_seed: u64) -> Result<CorridorReport> {
        let mut report = CorridorReport::default();
        for t in 0..trials {
            let out = self.trial(base_seed + t)?;
            let counts = &out.invalid_counts;
            report.trials += 1;
            report.refined += usize::from(out.iterations > 0);
            report.non_increasing += usize::from(counts.windows(2).all(|w| w[1] <= w[0]));
            report.reduced += usize::from(counts.last() < counts.first());
        }
        Ok(report)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorridorReport {
    pub trials: usize,
    /// Trials that ran at least one refinement iteration.
    pub refined: usize,
    /// Trials whose invalid count never rose between iterations.
    pub non_increasing: usize,
    /// Trials that ended with fewer invalid neighbours than they started.
    pub reduced: usize,
}

impl CorridorReport {
    pub fn non_increasing_fraction(&self) -> f64 {
        self.non_increasing as f64 / self.trials.max(1) as f64
    }
}
