use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};
use crate::force::ChargeModel;
use crate::knn::{DEFAULT_GAMMA_MAX, DEFAULT_LOOP_CAP};
use crate::space::RggParams;

/// How candidate edge targets are chosen during forward search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborMode {
    /// Force-oriented ellipsoidal neighbourhoods.
    Elliptical,
    /// Plain k-nearest within the connection radius.
    Spherical,
}

impl NeighborMode {
    pub fn planner_id(self) -> &'static str {
        match self {
            NeighborMode::Elliptical => "fdit",
            NeighborMode::Spherical => "spherical",
        }
    }
}

/// Source of elapsed time for budgets and timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Deterministic work-based clock; identical inputs give identical
    /// timestamps on every machine.
    Virtual,
    /// Monotonic wall clock.
    Wall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Samples drawn per batch.
    pub batch_size: usize,
    pub eta: f64,
    /// Multiplier applied to the connection radius.
    pub rewire_factor: f64,
    pub charge: ChargeModel,
    pub neighbor_mode: NeighborMode,
    /// Maximum ellipsoid elongation.
    pub gamma_max: f64,
    /// Maximum refinement iterations per neighbour query.
    pub loop_cap: usize,
    /// Budget in seconds.
    pub time_budget: f64,
    pub seed: u64,
    pub clock: ClockMode,
    /// Invalid samples kept at most; defaults to 50 batches' worth.
    pub max_invalid_store: Option<usize>,
    /// Break key ties by estimated collision-check effort.
    pub effort_tiebreak: bool,
    /// Stop after this many batches regardless of budget.
    pub max_batches: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            batch_size: 200,
            eta: RggParams::DEFAULT_ETA,
            rewire_factor: RggParams::DEFAULT_REWIRE_FACTOR,
            charge: ChargeModel::default(),
            neighbor_mode: NeighborMode::Elliptical,
            gamma_max: DEFAULT_GAMMA_MAX,
            loop_cap: DEFAULT_LOOP_CAP,
            time_budget: 1.0,
            seed: 0,
            clock: ClockMode::Virtual,
            max_invalid_store: None,
            effort_tiebreak: false,
            max_batches: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid_param("batch_size", "must be >= 1"));
        }
        if !(self.time_budget > 0.0) || self.time_budget.is_nan() {
            return Err(invalid_param(
                "time_budget",
                format!("must be > 0, got {}", self.time_budget),
            ));
        }
        if !(self.gamma_max >= 0.0) || !self.gamma_max.is_finite() {
            return Err(invalid_param(
                "gamma_max",
                format!("must be finite and >= 0, got {}", self.gamma_max),
            ));
        }
        if self.loop_cap == 0 {
            return Err(invalid_param("loop_cap", "must be >= 1"));
        }
        if self.max_invalid_store == Some(0) {
            return Err(invalid_param("max_invalid_store", "must be >= 1"));
        }
        self.rgg(2).validate()?;
        self.charge.validate()
    }

    pub fn rgg(&self, dimension: usize) -> RggParams {
        RggParams {
            eta: self.eta,
            rewire_factor: self.rewire_factor,
            dimension,
        }
    }

    pub fn invalid_capacity(&self) -> usize {
        self.max_invalid_store.unwrap_or(50 * self.batch_size)
    }
}
