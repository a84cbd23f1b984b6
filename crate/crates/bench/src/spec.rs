//! Benchmark spec files.
//!
//! ```toml
//! schema_version = 1
//! name = "dw4"
//! runs = 100
//! base_seed = 0
//! planners = ["spherical", "fdit"]
//!
//! [planner]          # optional overrides of the planner defaults
//! batch_size = 200
//!
//! [[problem]]
//! env = "dw"         # dw, rr, free, or a path to an environment file
//! dimension = 4
//! time_budget = 0.3
//! world_seed = 0     # only used by rr
//! ```

use std::path::{Path, PathBuf};

use fdit::{Environment, NeighborMode, PlannerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::scenario::build_environment;

pub const SPEC_SCHEMA_VERSION: u32 = 1;

pub fn parse_planner(id: &str) -> Result<NeighborMode> {
    match id {
        "fdit" => Ok(NeighborMode::Elliptical),
        "spherical" => Ok(NeighborMode::Spherical),
        other => Err(BenchError::UnknownPlanner(other.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub env: String,
    pub dimension: usize,
    pub time_budget: f64,
    #[serde(default)]
    pub world_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub schema_version: u32,
    pub name: String,
    pub runs: u64,
    #[serde(default)]
    pub base_seed: u64,
    pub planners: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerConfig>,
    #[serde(rename = "problem")]
    pub problems: Vec<Problem>,
}

impl BenchmarkSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| BenchError::Spec(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("specs always serialize")
    }

    /// Checks every field and builds every environment, so that a bad spec
    /// fails before any run starts. Relative environment paths resolve
    /// against `base_dir`.
    pub fn prepare(&self, base_dir: Option<&Path>) -> Result<PreparedSpec> {
        if self.schema_version != SPEC_SCHEMA_VERSION {
            return Err(BenchError::Spec(format!(
                "unsupported schema version {}",
                self.schema_version
            )));
        }
        if self.runs == 0 {
            return Err(BenchError::Spec("runs must be at least 1".into()));
        }
        if self.planners.is_empty() {
            return Err(BenchError::Spec("no planners listed".into()));
        }
        if self.problems.is_empty() {
            return Err(BenchError::Spec("no problems listed".into()));
        }
        if self.base_seed.checked_add(self.runs).is_none() {
            return Err(BenchError::Spec("seed range overflows".into()));
        }
        let planners = self
            .planners
            .iter()
            .map(|p| parse_planner(p).map(|mode| (p.clone(), mode)))
            .collect::<Result<Vec<_>>>()?;
        let base = self.planner.clone().unwrap_or_default();
        let mut problems = Vec::with_capacity(self.problems.len());
        for p in &self.problems {
            if !(p.time_budget > 0.0 && p.time_budget.is_finite()) {
                return Err(BenchError::Spec(format!(
                    "time_budget must be positive, got {}",
                    p.time_budget
                )));
            }
            let env = build_environment(&resolve(&p.env, base_dir), p.dimension, p.world_seed)?;
            for (_, mode) in &planners {
                config_for(&base, *mode, p.time_budget, self.base_seed).validate()?;
            }
            problems.push(PreparedProblem {
                problem: p.clone(),
                env,
            });
        }
        Ok(PreparedSpec {
            runs: self.runs,
            base_seed: self.base_seed,
            planners,
            base,
            problems,
        })
    }
}

fn resolve(env: &str, base_dir: Option<&Path>) -> String {
    match base_dir {
        Some(dir) if env.ends_with(".toml") && Path::new(env).is_relative() => {
            let p: PathBuf = dir.join(env);
            p.to_string_lossy().into_owned()
        }
        _ => env.to_string(),
    }
}

pub fn config_for(
    base: &PlannerConfig,
    mode: NeighborMode,
    time_budget: f64,
    seed: u64,
) -> PlannerConfig {
    PlannerConfig {
        neighbor_mode: mode,
        time_budget,
        seed,
        ..base.clone()
    }
}

#[derive(Clone, Debug)]
pub struct PreparedProblem {
    pub problem: Problem,
    pub env: Environment,
}

/// A validated spec with its environments built.
#[derive(Clone, Debug)]
pub struct PreparedSpec {
    pub runs: u64,
    pub base_seed: u64,
    pub planners: Vec<(String, NeighborMode)>,
    pub base: PlannerConfig,
    pub problems: Vec<PreparedProblem>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
schema_version = 1
name = "small"
runs = 3
planners = ["spherical", "fdit"]

[planner]
batch_size = 50

[[problem]]
env = "dw"
dimension = 2
time_budget = 0.05
"#;

    #[test]
    fn parses_and_prepares() {
        let spec = BenchmarkSpec::from_toml_str(SPEC).unwrap();
        assert_eq!(spec.planner.as_ref().unwrap().batch_size, 50);
        let prepared = spec.prepare(None).unwrap();
        assert_eq!(prepared.planners.len(), 2);
        assert_eq!(prepared.problems[0].env.dimension(), 2);
        assert_eq!(
            BenchmarkSpec::from_toml_str(&spec.to_toml_string()).unwrap(),
            spec
        );
    }

    #[test]
    fn rejects_bad_specs_before_running() {
        let bad_planner = SPEC.replace("\"fdit\"", "\"rrt\"");
        let err = BenchmarkSpec::from_toml_str(&bad_planner)
            .unwrap()
            .prepare(None)
            .unwrap_err();
        assert!(matches!(err, BenchError::UnknownPlanner(_)));
        let bad_env = SPEC.replace("env = \"dw\"", "env = \"nowhere\"");
        let err = BenchmarkSpec::from_toml_str(&bad_env)
            .unwrap()
            .prepare(None)
            .unwrap_err();
        assert!(matches!(err, BenchError::UnknownEnvironment(_)));
        let zero = SPEC.replace("runs = 3", "runs = 0");
        assert!(BenchmarkSpec::from_toml_str(&zero)
            .unwrap()
            .prepare(None)
            .is_err());
        assert!(
            BenchmarkSpec::from_toml_str(&SPEC.replace("runs = 3", "runs = 3\nextra = 1")).is_err()
        );
        let bad_cfg = SPEC.replace("batch_size = 50", "batch_size = 0");
        let err = BenchmarkSpec::from_toml_str(&bad_cfg)
            .unwrap()
            .prepare(None)
            .unwrap_err();
        assert!(err.is_usage());
    }
}
