//! Benchmark harness for the fdit planner: spec files, parallel seeded runs,
//! JSON-lines records, order-statistic summaries, SVG rendering and the
//! command-line front end.

pub mod cli;
pub mod error;
pub mod record;
pub mod runner;
pub mod scenario;
pub mod spec;
pub mod stats;
pub mod svg;

pub use error::{BenchError, Result};
pub use record::{read_records, write_record, RunRecord};
pub use spec::BenchmarkSpec;
