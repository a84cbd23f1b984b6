//! Elapsed-time accounting for planner budgets.
//!
//! The virtual clock charges a fixed cost per unit of work so that budgets
//! and timestamps are reproducible bit for bit. Costs are nanoseconds
//! measured once on a reference machine and then frozen.

use std::time::Instant;

use super::config::ClockMode;

/// Per-operation costs in nanoseconds, fitted by least squares against
/// wall-clock runs on the reference machine across 2 to 16 dimensions.
pub mod cost {
    pub const STATE_CHECK_BASE: f64 = 2.0;
    /// Per obstacle and coordinate examined.
    pub const STATE_CHECK_PER_OBSTACLE_AXIS: f64 = 0.33;
    pub const DISTANCE: f64 = 11.4;
    pub const NODE_VISIT_PER_AXIS: f64 = 2.65;
    pub const QUEUE_OP: f64 = 434.0;
    pub const RELAXATION: f64 = 16.2;
    pub const SAMPLE_PER_AXIS: f64 = 2.0;
    /// Per unit of `N log2 N`.
    pub const INDEX_BUILD: f64 = 233.0;
    pub const FORCE_PER_TERM_AXIS: f64 = 8.2;
    pub const NEIGHBOR_QUERY: f64 = 0.0;
}

#[derive(Clone, Debug)]
pub struct PlannerClock {
    mode: ClockMode,
    started: Instant,
    work_ns: f64,
}

impl PlannerClock {
    pub fn start(mode: ClockMode) -> Self {
        PlannerClock {
            mode,
            started: Instant::now(),
            work_ns: 0.0,
        }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    /// Records `ns` nanoseconds of modelled work.
    pub fn charge(&mut self, ns: f64) {
        self.work_ns += ns;
    }

    /// Seconds since start under the configured mode.
    pub fn elapsed(&self) -> f64 {
        match self.mode {
            ClockMode::Virtual => self.work_ns * 1e-9,
            ClockMode::Wall => self.started.elapsed().as_secs_f64(),
        }
    }

    /// Modelled work in seconds regardless of mode.
    pub fn modelled(&self) -> f64 {
        self.work_ns * 1e-9
    }
}
