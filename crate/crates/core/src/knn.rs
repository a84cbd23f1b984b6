//! Force-oriented ellipsoidal nearest-neighbour search over a mixed set of
//! valid and invalid samples.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::error::{invalid_param, FditError, Result};
use crate::force::{charge_ratio, resultant_force, ChargeModel, ForceVector, Polarity};
use crate::index::{euclidean_box_distance, Euclidean, KdTree, QueryMetric, Visitor};
use crate::space::{dist, unit_ball_volume};

/// Charge ratio at or above which the neighbourhood is refined.
pub const CHARGE_RATIO_THRESHOLD: f64 = 0.1;
pub const DEFAULT_GAMMA_MAX: f64 = 1.0;
pub const DEFAULT_LOOP_CAP: usize = 5;

const INVALID_BIT: u32 = 1 << 31;
// Guards box pruning against rounding in the rotated-frame distance.
const LOWER_BOUND_SLACK: f64 = 1.0 - 1e-12;

/// Handle to a stored sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleRef {
    Valid(usize),
    Invalid(usize),
}

impl SampleRef {
    pub fn polarity(self) -> Polarity {
        match self {
            SampleRef::Valid(_) => Polarity::Positive,
            SampleRef::Invalid(_) => Polarity::Negative,
        }
    }
}

/// A sample together with its distance from the query centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub sample: SampleRef,
    pub distance: f64,
}

/// Valid and invalid samples stored in insertion order, with an optional
/// static spatial index rebuilt on demand.
#[derive(Debug)]
pub struct SampleSet {
    dim: usize,
    valid: Vec<f64>,
    valid_ids: Vec<u64>,
    invalid: Vec<f64>,
    invalid_ids: Vec<u64>,
    next_id: u64,
    index: Option<KdTree>,
    evaluations: AtomicU64,
    node_visits: AtomicU64,
}

impl Clone for SampleSet {
    fn clone(&self) -> Self {
        SampleSet {
            dim: self.dim,
            valid: self.valid.clone(),
            valid_ids: self.valid_ids.clone(),
            invalid: self.invalid.clone(),
            invalid_ids: self.invalid_ids.clone(),
            next_id: self.next_id,
            index: self.index.clone(),
            evaluations: AtomicU64::new(self.evaluations.load(AtomicOrdering::Relaxed)),
            node_visits: AtomicU64::new(self.node_visits.load(AtomicOrdering::Relaxed)),
        }
    }
}

impl SampleSet {
    pub fn new(dim: usize) -> Self {
        SampleSet {
            dim,
            valid: Vec::new(),
            valid_ids: Vec::new(),
            invalid: Vec::new(),
            invalid_ids: Vec::new(),
            next_id: 0,
            index: None,
            evaluations: AtomicU64::new(0),
            node_visits: AtomicU64::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stores a sample. Any existing index becomes stale and is dropped.
    pub fn insert(&mut self, coords: &[f64], polarity: Polarity) -> Result<SampleRef> {
        if coords.len() != self.dim {
            return Err(FditError::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        self.index = None;
        let id = self.next_id;
        self.next_id += 1;
        Ok(match polarity {
            Polarity::Positive => {
                self.valid.extend_from_slice(coords);
                self.valid_ids.push(id);
                SampleRef::Valid(self.valid_ids.len() - 1)
            }
            Polarity::Negative => {
                self.invalid.extend_from_slice(coords);
                self.invalid_ids.push(id);
                SampleRef::Invalid(self.invalid_ids.len() - 1)
            }
        })
    }

    pub fn insert_valid(&mut self, coords: &[f64]) -> Result<usize> {
        match self.insert(coords, Polarity::Positive)? {
            SampleRef::Valid(i) => Ok(i),
            SampleRef::Invalid(_) => unreachable!(),
        }
    }

    pub fn insert_invalid(&mut self, coords: &[f64]) -> Result<usize> {
        match self.insert(coords, Polarity::Negative)? {
            SampleRef::Invalid(i) => Ok(i),
            SampleRef::Valid(_) => unreachable!(),
        }
    }

    pub fn len_valid(&self) -> usize {
        self.valid_ids.len()
    }

    pub fn len_invalid(&self) -> usize {
        self.invalid_ids.len()
    }

    pub fn len(&self) -> usize {
        self.len_valid() + self.len_invalid()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn valid(&self, i: usize) -> &[f64] {
        &self.valid[i * self.dim..(i + 1) * self.dim]
    }

    pub fn invalid(&self, j: usize) -> &[f64] {
        &self.invalid[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coords(&self, r: SampleRef) -> &[f64] {
        match r {
            SampleRef::Valid(i) => self.valid(i),
            SampleRef::Invalid(j) => self.invalid(j),
        }
    }

    /// Insertion-order identifier, stable across pruning.
    pub fn id(&self, r: SampleRef) -> u64 {
        match r {
            SampleRef::Valid(i) => self.valid_ids[i],
            SampleRef::Invalid(j) => self.invalid_ids[j],
        }
    }

    pub fn valid_id(&self, i: usize) -> u64 {
        self.valid_ids[i]
    }

    pub fn valid_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.valid
            .chunks_exact(self.dim.max(1))
            .take(self.len_valid())
    }

    pub fn invalid_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.invalid
            .chunks_exact(self.dim.max(1))
            .take(self.len_invalid())
    }

    /// Every stored sample, valid ones first, each in insertion order.
    pub fn refs(&self) -> impl Iterator<Item = SampleRef> {
        (0..self.len_valid())
            .map(SampleRef::Valid)
            .chain((0..self.len_invalid()).map(SampleRef::Invalid))
    }

    /// Keeps only samples for which `keep` returns true, preserving order.
    /// Returns the new position of every former valid index.
    pub fn retain<F>(&mut self, mut keep: F) -> Vec<Option<usize>>
    where
        F: FnMut(SampleRef, &[f64]) -> bool,
    {
        self.index = None;
        let dim = self.dim;
        let mut remap = Vec::with_capacity(self.len_valid());
        let (mut valid, mut valid_ids) = (Vec::new(), Vec::new());
        for i in 0..self.len_valid() {
            let p = &self.valid[i * dim..(i + 1) * dim];
            if keep(SampleRef::Valid(i), p) {
                remap.push(Some(valid_ids.len()));
                valid.extend_from_slice(p);
                valid_ids.push(self.valid_ids[i]);
            } else {
                remap.push(None);
            }
        }
        let (mut invalid, mut invalid_ids) = (Vec::new(), Vec::new());
        for j in 0..self.len_invalid() {
            let p = &self.invalid[j * dim..(j + 1) * dim];
            if keep(SampleRef::Invalid(j), p) {
                invalid.extend_from_slice(p);
                invalid_ids.push(self.invalid_ids[j]);
            }
        }
        self.valid = valid;
        self.valid_ids = valid_ids;
        self.invalid = invalid;
        self.invalid_ids = invalid_ids;
        remap
    }

    /// Drops the oldest invalid samples until at most `capacity` remain.
    pub fn evict_oldest_invalid(&mut self, capacity: usize) -> usize {
        let excess = self.len_invalid().saturating_sub(capacity);
        if excess > 0 {
            self.index = None;
            self.invalid.drain(..excess * self.dim);
            self.invalid_ids.drain(..excess);
        }
        excess
    }

    /// Rebuilds the spatial index over every stored sample.
    pub fn rebuild_index(&mut self) {
        let dim = self.dim;
        let valid = self
            .valid
            .chunks_exact(dim)
            .enumerate()
            .map(|(i, p)| (i as u32, p));
        let invalid = self
            .invalid
            .chunks_exact(dim)
            .enumerate()
            .map(|(j, p)| (j as u32 | INVALID_BIT, p));
        self.index = Some(KdTree::build(dim, valid.chain(invalid)));
    }

    pub fn has_index(&self) -> bool {
        self.index.is_some()
    }

    /// Number of point-distance evaluations since the last call.
    pub fn take_evaluations(&self) -> u64 {
        self.evaluations.swap(0, AtomicOrdering::Relaxed)
    }

    /// Number of index boxes examined since the last call.
    pub fn take_node_visits(&self) -> u64 {
        self.node_visits.swap(0, AtomicOrdering::Relaxed)
    }

    fn decode(item: u32) -> SampleRef {
        if item & INVALID_BIT != 0 {
            SampleRef::Invalid((item & !INVALID_BIT) as usize)
        } else {
            SampleRef::Valid(item as usize)
        }
    }

    fn scan<M: QueryMetric, V: Visitor>(&self, metric: &M, visitor: &mut V) {
        match &self.index {
            Some(tree) => {
                let counted = Counted {
                    inner: metric,
                    points: std::cell::Cell::new(0),
                    boxes: std::cell::Cell::new(0),
                };
                tree.search(&counted, visitor);
                self.evaluations
                    .fetch_add(counted.points.get(), AtomicOrdering::Relaxed);
                self.node_visits
                    .fetch_add(counted.boxes.get(), AtomicOrdering::Relaxed);
            }
            None => {
                for r in self.refs() {
                    let d = metric.distance(self.coords(r));
                    if d <= visitor.bound() {
                        let item = match r {
                            SampleRef::Valid(i) => i as u32,
                            SampleRef::Invalid(j) => j as u32 | INVALID_BIT,
                        };
                        visitor.visit(item, d);
                    }
                }
                self.evaluations
                    .fetch_add(self.len() as u64, AtomicOrdering::Relaxed);
            }
        }
    }

    /// The `k` nearest valid samples (Euclidean) within `radius`, sorted by
    /// distance with ties broken by insertion order.
    pub fn spherical_knn(
        &self,
        center: &[f64],
        k: usize,
        radius: f64,
        exclude: Option<usize>,
    ) -> Vec<Neighbor> {
        let mut v = KnnVisitor::new(self, k, radius, exclude, false);
        self.scan(&Euclidean { center }, &mut v);
        v.finish().0
    }

    /// The `k` nearest valid samples inside `ellipsoid` plus every invalid
    /// sample no farther than the k-th valid one (or every invalid sample in
    /// the region when fewer than `k` valid samples lie inside).
    pub fn neighborhood(
        &self,
        ellipsoid: &SearchEllipsoid,
        k: usize,
        exclude: Option<usize>,
    ) -> Neighborhood {
        let mut v = KnnVisitor::new(self, k, ellipsoid.base_radius, exclude, true);
        self.scan(ellipsoid, &mut v);
        let (valid, invalid) = v.finish();
        Neighborhood { valid, invalid }
    }

    fn key(&self, n: &Neighbor) -> (f64, u64) {
        (n.distance, self.id(n.sample))
    }

    fn sort_neighbors(&self, list: &mut [Neighbor]) {
        list.sort_by(|a, b| {
            let (da, ia) = self.key(a);
            let (db, ib) = self.key(b);
            da.total_cmp(&db).then(ia.cmp(&ib))
        });
    }
}

struct Counted<'a, M> {
    inner: &'a M,
    points: std::cell::Cell<u64>,
    boxes: std::cell::Cell<u64>,
}

impl<M: QueryMetric> QueryMetric for Counted<'_, M> {
    fn center(&self) -> &[f64] {
        self.inner.center()
    }

    fn distance(&self, p: &[f64]) -> f64 {
        self.points.set(self.points.get() + 1);
        self.inner.distance(p)
    }

    fn box_lower_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.boxes.set(self.boxes.get() + 1);
        self.inner.box_lower_bound(lo, hi)
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    distance: f64,
    id: u64,
    index: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

struct KnnVisitor<'a> {
    set: &'a SampleSet,
    k: usize,
    radius: f64,
    exclude: Option<usize>,
    keep_invalid: bool,
    best: BinaryHeap<HeapEntry>,
    invalid: Vec<Neighbor>,
    bound: f64,
}

impl<'a> KnnVisitor<'a> {
    fn new(
        set: &'a SampleSet,
        k: usize,
        radius: f64,
        exclude: Option<usize>,
        keep_invalid: bool,
    ) -> Self {
        KnnVisitor {
            set,
            k,
            radius,
            exclude,
            keep_invalid,
            best: BinaryHeap::with_capacity(k + 1),
            invalid: Vec::new(),
            bound: if k == 0 { f64::NEG_INFINITY } else { radius },
        }
    }

    fn finish(self) -> (Vec<Neighbor>, Vec<Neighbor>) {
        let bound = self.bound;
        let mut valid: Vec<Neighbor> = self
            .best
            .into_sorted_vec()
            .into_iter()
            .map(|e| Neighbor {
                sample: SampleRef::Valid(e.index),
                distance: e.distance,
            })
            .collect();
        valid.truncate(self.k);
        let mut invalid: Vec<Neighbor> = self
            .invalid
            .into_iter()
            .filter(|n| n.distance <= bound)
            .collect();
        self.set.sort_neighbors(&mut invalid);
        (valid, invalid)
    }
}

impl Visitor for KnnVisitor<'_> {
    fn visit(&mut self, item: u32, distance: f64) {
        match SampleSet::decode(item) {
            SampleRef::Valid(i) => {
                if Some(i) == self.exclude {
                    return;
                }
                self.best.push(HeapEntry {
                    distance,
                    id: self.set.valid_ids[i],
                    index: i,
                });
                if self.best.len() > self.k {
                    self.best.pop();
                }
                if self.best.len() == self.k {
                    if let Some(top) = self.best.peek() {
                        self.bound = self.radius.min(top.distance);
                    }
                }
            }
            SampleRef::Invalid(j) => {
                if self.keep_invalid {
                    self.invalid.push(Neighbor {
                        sample: SampleRef::Invalid(j),
                        distance,
                    });
                }
            }
        }
    }

    fn bound(&self) -> f64 {
        self.bound
    }
}

/// Local neighbourhood of a query: nearest valid samples plus the invalid
/// samples interleaved with them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Neighborhood {
    pub valid: Vec<Neighbor>,
    pub invalid: Vec<Neighbor>,
}

/// A volume-preserving ellipsoid whose major axis follows a force direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchEllipsoid {
    center: Vec<f64>,
    direction: Option<Vec<f64>>,
    base_radius: f64,
    gamma: f64,
    major_scale: f64,
    minor_scale: f64,
}

impl SearchEllipsoid {
    pub fn ball(center: &[f64], base_radius: f64) -> Result<Self> {
        Self::new(center, None, base_radius, 0.0)
    }

    /// `direction` need not be normalized; a zero or absent direction, or
    /// `gamma == 0`, yields a ball.
    pub fn new(
        center: &[f64],
        direction: Option<&[f64]>,
        base_radius: f64,
        gamma: f64,
    ) -> Result<Self> {
        let n = center.len();
        if n < 2 {
            return Err(FditError::DimensionTooSmall(n));
        }
        if !(base_radius > 0.0) || !base_radius.is_finite() {
            return Err(invalid_param(
                "base_radius",
                format!("must be finite and > 0, got {base_radius}"),
            ));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(invalid_param(
                "gamma",
                format!("must be finite and >= 0, got {gamma}"),
            ));
        }
        let direction = match direction {
            Some(d) if gamma > 0.0 => {
                if d.len() != n {
                    return Err(FditError::DimensionMismatch {
                        expected: n,
                        got: d.len(),
                    });
                }
                ForceVector::new(d.to_vec()).direction()
            }
            _ => None,
        };
        let gamma = if direction.is_some() { gamma } else { 0.0 };
        let major_scale = 1.0 + gamma;
        let minor_scale = major_scale.powf(-1.0 / (n as f64 - 1.0));
        Ok(SearchEllipsoid {
            center: center.to_vec(),
            direction,
            base_radius,
            gamma,
            major_scale,
            minor_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center_coords(&self) -> &[f64] {
        &self.center
    }

    /// Unit major-axis direction; `None` for a ball.
    pub fn direction(&self) -> Option<&[f64]> {
        self.direction.as_deref()
    }

    pub fn base_radius(&self) -> f64 {
        self.base_radius
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_ball(&self) -> bool {
        self.direction.is_none()
    }

    /// Per-axis scale factors in the rotated frame, major axis first.
    pub fn axis_scales(&self) -> Vec<f64> {
        let mut v = vec![self.minor_scale; self.dim()];
        v[0] = self.major_scale;
        v
    }

    pub fn semi_axes(&self) -> Vec<f64> {
        self.axis_scales()
            .into_iter()
            .map(|s| s * self.base_radius)
            .collect()
    }

    pub fn major_semi_axis(&self) -> f64 {
        self.major_scale * self.base_radius
    }

    pub fn minor_semi_axis(&self) -> f64 {
        self.minor_scale * self.base_radius
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.semi_axes().iter().product::<f64>()
    }

    /// Distance in the scaled frame; points with `distance <= base_radius`
    /// lie inside. Reduces to the Euclidean distance for a ball.
    pub fn distance(&self, p: &[f64]) -> f64 {
        match &self.direction {
            None => dist(&self.center, p),
            Some(u) => {
                let mut along = 0.0;
                let mut total = 0.0;
                for ((a, c), ui) in p.iter().zip(&self.center).zip(u) {
                    let d = a - c;
                    along += d * ui;
                    total += d * d;
                }
                let perp = (total - along * along).max(0.0);
                let t = along / self.major_scale;
                (t * t + perp / (self.minor_scale * self.minor_scale)).sqrt()
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.distance(p) <= self.base_radius
    }
}

impl QueryMetric for SearchEllipsoid {
    fn center(&self) -> &[f64] {
        &self.center
    }

    fn distance(&self, p: &[f64]) -> f64 {
        SearchEllipsoid::distance(self, p)
    }

    fn box_lower_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let euclid = euclidean_box_distance(&self.center, lo, hi);
        if self.direction.is_none() {
            euclid
        } else {
            euclid / self.major_scale * LOWER_BOUND_SLACK
        }
    }
}

/// Elongation of the search region for a given force.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeParams {
    pub base_radius: f64,
    pub gamma_max: f64,
    /// Force magnitude at which full elongation is reached.
    pub force_reference: f64,
}

impl ShapeParams {
    /// Uses the median pair-force magnitude at `base_radius` as reference.
    pub fn new(base_radius: f64, gamma_max: f64, model: &ChargeModel, dim: usize) -> Self {
        ShapeParams {
            base_radius,
            gamma_max,
            force_reference: model.reference_magnitude(base_radius, dim),
        }
    }

    pub fn gamma_for(&self, force_norm: f64) -> f64 {
        if !(force_norm > 0.0) || !force_norm.is_finite() {
            return if force_norm.is_infinite() {
                self.gamma_max
            } else {
                0.0
            };
        }
        self.gamma_max * (force_norm / self.force_reference).min(1.0)
    }
}

/// Builds the search region around `x` oriented along `force`.
pub fn build_ellipsoid(
    x: &[f64],
    force: &ForceVector,
    shape: &ShapeParams,
) -> Result<SearchEllipsoid> {
    if force.dim() != x.len() {
        return Err(FditError::DimensionMismatch {
            expected: x.len(),
            got: force.dim(),
        });
    }
    if !(shape.gamma_max >= 0.0) || !shape.gamma_max.is_finite() {
        return Err(invalid_param(
            "gamma_max",
            format!("must be finite and >= 0, got {}", shape.gamma_max),
        ));
    }
    if !(shape.force_reference > 0.0) {
        return Err(invalid_param("force_reference", "must be > 0"));
    }
    let gamma = shape.gamma_for(force.norm());
    SearchEllipsoid::new(x, Some(force.components()), shape.base_radius, gamma)
}

pub fn is_within_ellipse(xi: &[f64], ellipsoid: &SearchEllipsoid) -> bool {
    ellipsoid.contains(xi)
}

/// Result of an exhaustive ellipsoid query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EllipseNearest {
    /// First `k` in-region valid samples by elliptical distance.
    pub nearest_valid: Vec<Neighbor>,
    pub valid_in_region: Vec<Neighbor>,
    pub invalid_in_region: Vec<Neighbor>,
}

impl EllipseNearest {
    /// In-region invalid samples no farther than the k-th nearest valid one;
    /// all of them when fewer than `k` valid samples were found.
    pub fn local_invalid(&self, k: usize) -> Vec<Neighbor> {
        if self.nearest_valid.len() < k || k == 0 {
            if k == 0 {
                return Vec::new();
            }
            return self.invalid_in_region.clone();
        }
        let bound = self.nearest_valid[k - 1].distance;
        self.invalid_in_region
            .iter()
            .copied()
            .filter(|n| n.distance <= bound)
            .collect()
    }

    pub fn neighborhood(&self, k: usize) -> Neighborhood {
        Neighborhood {
            valid: self.nearest_valid.clone(),
            invalid: self.local_invalid(k),
        }
    }
}

/// Exhaustive partition of every stored sample inside `ellipsoid`.
pub fn ellipse_nearest(
    samples: &SampleSet,
    ellipsoid: &SearchEllipsoid,
    k: usize,
    exclude: Option<usize>,
) -> EllipseNearest {
    let mut out = EllipseNearest::default();
    for r in samples.refs() {
        if let SampleRef::Valid(i) = r {
            if Some(i) == exclude {
                continue;
            }
        }
        let d = ellipsoid.distance(samples.coords(r));
        if d <= ellipsoid.base_radius() {
            let n = Neighbor {
                sample: r,
                distance: d,
            };
            match r {
                SampleRef::Valid(_) => out.valid_in_region.push(n),
                SampleRef::Invalid(_) => out.invalid_in_region.push(n),
            }
        }
    }
    samples.sort_neighbors(&mut out.valid_in_region);
    samples.sort_neighbors(&mut out.invalid_in_region);
    out.nearest_valid = out.valid_in_region.iter().take(k).copied().collect();
    out
}

/// Forward-tree connectivity as seen by the neighbour search. Vertices are
/// valid-sample indices.
pub trait TreeLinks {
    fn parent(&self, v: usize) -> Option<usize>;
    fn children(&self, v: usize) -> &[usize];
    fn is_edge_invalid(&self, a: usize, b: usize) -> bool;
}

/// No tree at all.
pub struct NoTree;

impl TreeLinks for NoTree {
    fn parent(&self, _v: usize) -> Option<usize> {
        None
    }

    fn children(&self, _v: usize) -> &[usize] {
        &[]
    }

    fn is_edge_invalid(&self, _a: usize, _b: usize) -> bool {
        false
    }
}

/// Neighbour set used by the planner: valid samples are candidate edge
/// targets, invalid ones only contribute charge.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborSet {
    pub valid: Vec<usize>,
    pub invalid: Vec<usize>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.valid.len() + self.invalid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn charge_ratio(&self) -> f64 {
        charge_ratio(
            std::iter::repeat_n(Polarity::Positive, self.valid.len())
                .chain(std::iter::repeat_n(Polarity::Negative, self.invalid.len())),
        )
    }

    pub fn refs(&self) -> impl Iterator<Item = SampleRef> + '_ {
        self.valid
            .iter()
            .map(|&i| SampleRef::Valid(i))
            .chain(self.invalid.iter().map(|&j| SampleRef::Invalid(j)))
    }
}

/// Neighbourhood of `vertex` in `ellipsoid`, plus its tree parent and
/// children, minus vertices joined to it by a known-invalid edge.
pub fn ellipse_neighbors<T: TreeLinks>(
    vertex: Option<usize>,
    ellipsoid: &SearchEllipsoid,
    k: usize,
    samples: &SampleSet,
    tree: &T,
) -> NeighborSet {
    let local = samples.neighborhood(ellipsoid, k, vertex);
    let mut valid: Vec<usize> = local
        .valid
        .iter()
        .map(|n| match n.sample {
            SampleRef::Valid(i) => i,
            SampleRef::Invalid(_) => unreachable!(),
        })
        .collect();
    let invalid = local
        .invalid
        .iter()
        .map(|n| match n.sample {
            SampleRef::Invalid(j) => j,
            SampleRef::Valid(_) => unreachable!(),
        })
        .collect();
    if let Some(v) = vertex {
        let links = tree
            .parent(v)
            .into_iter()
            .chain(tree.children(v).iter().copied());
        for u in links {
            if !valid.contains(&u) {
                valid.push(u);
            }
        }
        valid.retain(|&u| !tree.is_edge_invalid(v, u));
    }
    NeighborSet { valid, invalid }
}

/// Parameters of the iterative neighbourhood refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineParams {
    pub shape: ShapeParams,
    pub loop_cap: usize,
    pub model: ChargeModel,
}

/// Outcome of [`get_best_ellipse_k_nearest`] with per-iteration diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedNeighbors {
    pub neighbors: NeighborSet,
    pub ellipsoid: SearchEllipsoid,
    /// Number of refinement iterations executed.
    pub iterations: usize,
    /// Invalid neighbour count of the initial set and after each iteration.
    pub invalid_counts: Vec<usize>,
    pub charge_ratios: Vec<f64>,
    /// Pair-force terms summed across all iterations.
    pub force_terms: usize,
}

impl RefinedNeighbors {
    /// Valid members of the final set.
    pub fn valid(&self) -> &[usize] {
        &self.neighbors.valid
    }
}

/// Starts from an all-ones force (isotropic scales, i.e. the ball), then
/// re-orients the ellipsoid along the resultant force of the current neighbours while the invalid fraction
/// stays at or above the threshold, for at most `loop_cap` iterations.
pub fn get_best_ellipse_k_nearest<T: TreeLinks>(
    x: &[f64],
    vertex: Option<usize>,
    k: usize,
    samples: &SampleSet,
    tree: &T,
    params: &RefineParams,
) -> Result<RefinedNeighbors> {
    if k == 0 {
        return Err(invalid_param("k", "must be >= 1"));
    }
    if params.loop_cap == 0 {
        return Err(invalid_param("loop_cap", "must be >= 1"));
    }
    // The all-ones starting force stands for equal axis scales, so the
    // first query is the plain ball.
    let mut ellipsoid = SearchEllipsoid::ball(x, params.shape.base_radius)?;
    let mut neighbors = ellipse_neighbors(vertex, &ellipsoid, k, samples, tree);
    let mut ratio = neighbors.charge_ratio();
    let mut invalid_counts = vec![neighbors.invalid.len()];
    let mut charge_ratios = vec![ratio];
    let mut iterations = 0;
    let mut force_terms = 0;
    while ratio >= CHARGE_RATIO_THRESHOLD && iterations < params.loop_cap {
        force_terms += neighbors.len();
        let force = resultant_force(
            x,
            neighbors.refs().map(|r| (samples.coords(r), r.polarity())),
            &params.model,
        )
        .force;
        ellipsoid = build_ellipsoid(x, &force, &params.shape)?;
        neighbors = ellipse_neighbors(vertex, &ellipsoid, k, samples, tree);
        ratio = neighbors.charge_ratio();
        invalid_counts.push(neighbors.invalid.len());
        charge_ratios.push(ratio);
        iterations += 1;
    }
    Ok(RefinedNeighbors {
        neighbors,
        ellipsoid,
        iterations,
        invalid_counts,
        charge_ratios,
        force_terms,
    })
}

/// Exact `k` nearest points under `metric` by exhaustive scan, sorted by
/// distance with ties broken by position.
pub fn brute_force_knn<'a, I, M>(points: I, k: usize, metric: M) -> Vec<(usize, f64)>
where
    I: IntoIterator<Item = &'a [f64]>,
    M: Fn(&[f64]) -> f64,
{
    let mut all: Vec<(usize, f64)> = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| (i, metric(p)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}
