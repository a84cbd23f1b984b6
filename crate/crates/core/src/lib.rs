//! Force-directed informed trees: a batch informed motion planner whose
//! neighbour search is shaped by a charge field over valid and invalid
//! samples.

pub mod environment;
pub mod error;
pub mod force;
pub mod index;
pub mod knn;
pub mod planner;
pub mod snapshot;
pub mod space;

pub use environment::{Environment, HyperRectangle};
pub use error::{FditError, Result};
pub use force::{ChargeModel, ChargedSample, ForceVector, Polarity};
pub use knn::{SampleRef, SampleSet, SearchEllipsoid};
pub use planner::{plan, plan_with, NeighborMode, PlanOutcome, Planner, PlannerConfig, Solution};
pub use snapshot::Snapshot;
pub use space::{Bounds, InformedSet, RggParams, Sampler, State};
