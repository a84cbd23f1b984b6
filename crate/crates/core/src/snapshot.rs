//! JSON export of planner state for rendering and offline audits.
//!
//! Infinite costs are written as `null`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{FditError, Result};
use crate::planner::{Planner, Solution};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub dimension: usize,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub radius: Option<f64>,
    pub k: usize,
    pub c_best: Option<f64>,
    /// Valid samples; index 0 is the start and index 1 the goal.
    pub valid_samples: Vec<Vec<f64>>,
    pub invalid_samples: Vec<Vec<f64>>,
    /// Cost-to-come per valid sample; `null` outside the tree.
    pub cost_to_come: Vec<Option<f64>>,
    /// Reverse heuristic per valid sample; `null` when unreachable.
    pub heuristic: Vec<Option<f64>>,
    /// `(parent, child)` pairs.
    pub tree_edges: Vec<[usize; 2]>,
    /// Undirected edges of the heuristic graph, smaller index first.
    pub heuristic_edges: Vec<[usize; 2]>,
    /// Known-invalid edges between samples still stored.
    pub blacklisted_edges: Vec<[usize; 2]>,
    pub incumbents: Vec<Solution>,
}

impl Snapshot {
    /// A snapshot with no samples, only the problem endpoints.
    pub fn empty(env: &Environment) -> Self {
        Snapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            dimension: env.dimension(),
            start: env.start().coords().to_vec(),
            goal: env.goal().coords().to_vec(),
            radius: None,
            k: 0,
            c_best: None,
            valid_samples: Vec::new(),
            invalid_samples: Vec::new(),
            cost_to_come: Vec::new(),
            heuristic: Vec::new(),
            tree_edges: Vec::new(),
            heuristic_edges: Vec::new(),
            blacklisted_edges: Vec::new(),
            incumbents: Vec::new(),
        }
    }

    pub fn from_planner(planner: &Planner<'_>) -> Self {
        let env = planner.environment();
        let samples = planner.samples();
        let n_valid = samples.len_valid();
        let (radius, k) = planner.connection();
        let tree = planner.tree();
        let in_batch = tree.capacity() == n_valid;
        let cost_to_come = (0..n_valid)
            .map(|v| if in_batch { finite(tree.g(v)) } else { None })
            .collect();
        let heuristic = if planner.heuristic_values().len() == n_valid {
            planner
                .heuristic_values()
                .iter()
                .map(|&h| finite(h))
                .collect()
        } else {
            vec![None; n_valid]
        };
        let tree_edges = if in_batch {
            tree.edges().map(|(p, c)| [p, c]).collect()
        } else {
            Vec::new()
        };
        let mut heuristic_edges = Vec::new();
        if planner.heuristic_graph().len() == n_valid {
            for (a, list) in planner.heuristic_graph().iter().enumerate() {
                for &b in list {
                    if a < b {
                        heuristic_edges.push([a, b]);
                    }
                }
            }
        }
        let position: HashMap<u64, usize> =
            (0..n_valid).map(|i| (samples.valid_id(i), i)).collect();
        let blacklisted_edges = planner
            .edge_cache()
            .invalid_pairs()
            .into_iter()
            .filter_map(|(a, b)| Some([*position.get(&a)?, *position.get(&b)?]))
            .collect();
        Snapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            dimension: env.dimension(),
            start: env.start().coords().to_vec(),
            goal: env.goal().coords().to_vec(),
            radius: finite(radius),
            k,
            c_best: finite(planner.c_best()),
            valid_samples: samples.valid_iter().map(<[f64]>::to_vec).collect(),
            invalid_samples: samples.invalid_iter().map(<[f64]>::to_vec).collect(),
            cost_to_come,
            heuristic,
            tree_edges,
            heuristic_edges,
            blacklisted_edges,
            incumbents: planner.solutions().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| FditError::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: Snapshot =
            serde_json::from_str(s).map_err(|e| FditError::Config(e.to_string()))?;
        if snap.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(FditError::Config(format!(
                "unsupported snapshot schema version {}",
                snap.schema_version
            )));
        }
        Ok(snap)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
