use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{FditError, Result};
use crate::knn::{SampleSet, TreeLinks};
use crate::space::{dist, State};

/// Forward search tree over valid-sample indices.
#[derive(Clone, Debug)]
pub struct ForwardTree {
    root: usize,
    g: Vec<f64>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl ForwardTree {
    /// A tree containing only `root`, sized for `len` potential vertices.
    pub fn new(len: usize, root: usize) -> Self {
        let mut g = vec![f64::INFINITY; len];
        g[root] = 0.0;
        ForwardTree {
            root,
            g,
            parent: vec![None; len],
            children: vec![Vec::new(); len],
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn capacity(&self) -> usize {
        self.g.len()
    }

    /// Cost-to-come; infinite for vertices not in the tree.
    pub fn g(&self, v: usize) -> f64 {
        self.g[v]
    }

    pub fn contains(&self, v: usize) -> bool {
        self.g[v].is_finite()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.g.len()).filter(|&v| self.contains(v))
    }

    /// `(parent, child)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.g.len()).filter_map(|v| self.parent[v].map(|p| (p, v)))
    }

    pub fn len(&self) -> usize {
        self.vertices().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Makes `source` the parent of `target` and refreshes the cost of
    /// every descendant. Returns the vertices whose cost changed, `target`
    /// first.
    pub fn reparent(&mut self, target: usize, source: usize, samples: &SampleSet) -> Vec<usize> {
        debug_assert!(self.contains(source));
        debug_assert_ne!(target, self.root);
        if let Some(old) = self.parent[target] {
            self.children[old].retain(|&c| c != target);
        }
        self.parent[target] = Some(source);
        self.children[source].push(target);
        let mut changed = vec![target];
        let mut i = 0;
        while i < changed.len() {
            let v = changed[i];
            let p = self.parent[v].expect("non-root vertex has a parent");
            self.g[v] = self.g[p] + dist(samples.valid(p), samples.valid(v));
            changed.extend_from_slice(&self.children[v]);
            i += 1;
        }
        changed
    }

    /// Recomputes every cost from the root and reports the first
    /// inconsistency, if any.
    pub fn audit(&self, samples: &SampleSet) -> std::result::Result<(), String> {
        if self.g[self.root] != 0.0 {
            return Err(format!("root cost is {}", self.g[self.root]));
        }
        for v in self.vertices() {
            if v == self.root {
                continue;
            }
            let p = self.parent[v].ok_or_else(|| format!("vertex {v} has no parent"))?;
            if !self.children[p].contains(&v) {
                return Err(format!("vertex {v} missing from children of {p}"));
            }
            let want = self.g[p] + dist(samples.valid(p), samples.valid(v));
            if want != self.g[v] {
                return Err(format!("vertex {v}: g = {}, recomputed {want}", self.g[v]));
            }
        }
        // every vertex must reach the root without revisiting
        for v in self.vertices() {
            let mut seen = HashSet::new();
            let mut u = v;
            while let Some(p) = self.parent[u] {
                if !seen.insert(u) {
                    return Err(format!("cycle through {u}"));
                }
                u = p;
            }
            if u != self.root {
                return Err(format!("vertex {v} not connected to the root"));
            }
        }
        Ok(())
    }
}

/// An emitted path with its cost and the planner time at emission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub path: Vec<State>,
    pub cost: f64,
    /// Seconds since planner start.
    pub time: f64,
}

/// Walks parent links from `goal` back to the root.
pub fn extract_path(
    tree: &ForwardTree,
    samples: &SampleSet,
    goal: usize,
    time: f64,
) -> Result<Solution> {
    if !tree.contains(goal) {
        return Err(FditError::DisconnectedGoal);
    }
    let mut chain = vec![goal];
    let mut v = goal;
    while let Some(p) = tree.parent(v) {
        chain.push(p);
        v = p;
        if chain.len() > tree.capacity() {
            return Err(FditError::DisconnectedGoal);
        }
    }
    if v != tree.root() {
        return Err(FditError::DisconnectedGoal);
    }
    chain.reverse();
    Ok(Solution {
        path: chain
            .iter()
            .map(|&i| State::from(samples.valid(i)))
            .collect(),
        cost: tree.g(goal),
        time,
    })
}

/// Edges known to be in collision, keyed by stable sample ids.
#[derive(Clone, Debug, Default)]
pub struct EdgeCache {
    valid: HashSet<(u64, u64)>,
    invalid: HashSet<(u64, u64)>,
}

fn key(a: u64, b: u64) -> (u64, u64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl EdgeCache {
    pub fn lookup(&self, a: u64, b: u64) -> Option<bool> {
        let k = key(a, b);
        if self.valid.contains(&k) {
            Some(true)
        } else if self.invalid.contains(&k) {
            Some(false)
        } else {
            None
        }
    }

    pub fn record(&mut self, a: u64, b: u64, valid: bool) {
        let k = key(a, b);
        if valid {
            self.valid.insert(k);
        } else {
            self.invalid.insert(k);
        }
    }

    pub fn is_invalid(&self, a: u64, b: u64) -> bool {
        self.invalid.contains(&key(a, b))
    }

    pub fn invalid_len(&self) -> usize {
        self.invalid.len()
    }

    /// Known-invalid pairs, sorted.
    pub fn invalid_pairs(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<_> = self.invalid.iter().copied().collect();
        v.sort_unstable();
        v
    }
}

/// Tree links plus the blacklist, as consumed by the neighbour search.
pub struct TreeView<'a> {
    pub tree: &'a ForwardTree,
    pub samples: &'a SampleSet,
    pub edges: &'a EdgeCache,
}

impl TreeLinks for TreeView<'_> {
    fn parent(&self, v: usize) -> Option<usize> {
        self.tree.parent(v)
    }

    fn children(&self, v: usize) -> &[usize] {
        self.tree.children(v)
    }

    fn is_edge_invalid(&self, a: usize, b: usize) -> bool {
        self.edges
            .is_invalid(self.samples.valid_id(a), self.samples.valid_id(b))
    }
}
