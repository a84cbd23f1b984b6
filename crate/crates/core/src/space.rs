//! Configuration-space primitives: states, metrics, random geometric graph
//! connection parameters, and uniform / informed sampling over a bounded
//! hypercube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, FditError, Result};

/// A point in the n-dimensional configuration space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(Vec<f64>);

impl State {
    pub fn new(coords: Vec<f64>) -> Self {
        State(coords)
    }

    /// A state with every coordinate equal to `value`.
    pub fn splat(dimension: usize, value: f64) -> Self {
        State(vec![value; dimension])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for State {
    fn from(v: Vec<f64>) -> Self {
        State(v)
    }
}

impl From<&[f64]> for State {
    fn from(v: &[f64]) -> Self {
        State(v.to_vec())
    }
}

impl AsRef<[f64]> for State {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for State {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(FditError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Unchecked L2 distance on raw coordinate slices.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Euclidean distance between two states of equal dimension.
pub fn euclidean_distance(a: &State, b: &State) -> Result<f64> {
    check_dims(a.coords(), b.coords())?;
    Ok(dist(a.coords(), b.coords()))
}

/// Axis-aligned elliptical distance `sqrt(sum(((a_i - b_i) / v_i)^2))`.
///
/// Reduces to the Euclidean distance when every scale is one.
pub fn elliptical_distance(a: &State, b: &State, scales: &[f64]) -> Result<f64> {
    check_dims(a.coords(), b.coords())?;
    check_dims(a.coords(), scales)?;
    if let Some(v) = scales.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(invalid_param(
            "scales",
            format!("every scale must be finite and positive, got {v}"),
        ));
    }
    Ok(a.coords()
        .iter()
        .zip(b.coords())
        .zip(scales)
        .map(|((x, y), v)| {
            let d = (x - y) / v;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Lebesgue measure of the n-dimensional unit ball.
pub fn unit_ball_volume(n: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_n = 2*pi/n * V_{n-2}
    let (mut v, start) = if n.is_multiple_of(2) {
        (1.0, 2)
    } else {
        (2.0, 3)
    };
    let mut k = start;
    while k <= n {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Connection parameters of the random geometric graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RggParams {
    pub eta: f64,
    pub rewire_factor: f64,
    pub dimension: usize,
}

impl RggParams {
    pub const DEFAULT_ETA: f64 = 1.1;
    pub const DEFAULT_REWIRE_FACTOR: f64 = 1.001;

    pub fn new(dimension: usize) -> Self {
        RggParams {
            eta: Self::DEFAULT_ETA,
            rewire_factor: Self::DEFAULT_REWIRE_FACTOR,
            dimension,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(FditError::DimensionTooSmall(self.dimension));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(invalid_param(
                "eta",
                format!("must be > 0, got {}", self.eta),
            ));
        }
        if !(self.rewire_factor >= 1.0) || !self.rewire_factor.is_finite() {
            return Err(invalid_param(
                "rewire_factor",
                format!("must be >= 1, got {}", self.rewire_factor),
            ));
        }
        Ok(())
    }

    /// Connection radius
    /// `r(q) = 2 eta ((1 + 1/n) (measure / unit_ball) (ln q / q))^(1/n)`.
    pub fn radius(&self, q: usize, informed_measure: f64) -> Result<f64> {
        if q < 2 {
            return Err(FditError::TooFewSamples(q));
        }
        if !(informed_measure > 0.0) {
            return Err(invalid_param(
                "informed_measure",
                format!("must be > 0, got {informed_measure}"),
            ));
        }
        let n = self.dimension as f64;
        let qf = q as f64;
        let inner = (1.0 + 1.0 / n)
            * (informed_measure / unit_ball_volume(self.dimension))
            * (qf.ln() / qf);
        Ok(2.0 * self.eta * inner.powf(1.0 / n))
    }

    /// Neighbour count `k(q) = floor(eta e (1 + 1/n) ln q)`, at least 1.
    pub fn k(&self, q: usize) -> Result<usize> {
        if q < 2 {
            return Err(FditError::TooFewSamples(q));
        }
        let n = self.dimension as f64;
        let k = self.eta * std::f64::consts::E * (1.0 + 1.0 / n) * (q as f64).ln();
        Ok((k.floor() as usize).max(1))
    }
}

/// Free-function form of [`RggParams::radius`].
pub fn rgg_radius(q: usize, informed_measure: f64, params: &RggParams) -> Result<f64> {
    params.radius(q, informed_measure)
}

/// Free-function form of [`RggParams::k`].
pub fn rgg_k(q: usize, params: &RggParams) -> Result<usize> {
    params.k(q)
}

/// Axis-aligned box bounding the configuration space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unit(dimension: usize) -> Self {
        Bounds {
            lower: vec![0.0; dimension],
            upper: vec![1.0; dimension],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }
}

/// The prolate hyperspheroid `{x : |x - a| + |x - b| <= c_best}` of states that
/// could lie on a path better than the incumbent.
#[derive(Clone, Debug, PartialEq)]
pub struct InformedSet {
    focus_a: State,
    focus_b: State,
    c_best: f64,
    c_min: f64,
}

impl InformedSet {
    pub fn new(start: State, goal: State, c_best: f64) -> Result<Self> {
        let c_min = euclidean_distance(&start, &goal)?;
        if c_best.is_nan() || c_best < c_min {
            return Err(FditError::CostBelowFocalDistance { c_best, c_min });
        }
        Ok(InformedSet {
            focus_a: start,
            focus_b: goal,
            c_best,
            c_min,
        })
    }

    pub fn start(&self) -> &State {
        &self.focus_a
    }

    pub fn goal(&self) -> &State {
        &self.focus_b
    }

    pub fn c_best(&self) -> f64 {
        self.c_best
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn dim(&self) -> usize {
        self.focus_a.dim()
    }

    pub fn is_bounded(&self) -> bool {
        self.c_best.is_finite()
    }

    /// Admissible lower bound on the cost of any path through `x`.
    pub fn cost_lower_bound(&self, x: &[f64]) -> f64 {
        dist(x, self.focus_a.coords()) + dist(x, self.focus_b.coords())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        !self.is_bounded() || self.cost_lower_bound(x) <= self.c_best
    }

    /// Volume of the hyperspheroid (infinite when unbounded).
    pub fn spheroid_volume(&self) -> f64 {
        if !self.is_bounded() {
            return f64::INFINITY;
        }
        let n = self.dim();
        let transverse = self.c_best / 2.0;
        let conjugate = (self.c_best * self.c_best - self.c_min * self.c_min)
            .max(0.0)
            .sqrt()
            / 2.0;
        unit_ball_volume(n) * transverse * conjugate.powi(n as i32 - 1)
    }
}

/// Smallest measure handed to the radius formula.
pub const MEASURE_FLOOR: f64 = 1e-12;

/// Measure of the informed set clipped to the bounds, floored at
/// [`MEASURE_FLOOR`].
pub fn informed_measure(set: &InformedSet, bounds: &Bounds) -> f64 {
    set.spheroid_volume()
        .min(bounds.volume())
        .max(MEASURE_FLOOR)
}

/// Seeded sampler over a bounded box.
///
/// Each planner run owns one; the generator is deliberately not `Sync`-shared.
#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
    bounds: Bounds,
}

impl Sampler {
    pub fn new(bounds: Bounds, seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bounds,
        }
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn sample_uniform(&mut self) -> State {
        let coords = self
            .bounds
            .lower
            .iter()
            .zip(&self.bounds.upper)
            .map(|(lo, hi)| lo + (hi - lo) * self.rng.random::<f64>())
            .collect();
        State(coords)
    }

    /// Uniform sample from the informed set intersected with the bounds.
    ///
    /// When the hyperspheroid is larger than the box, box samples are
    /// rejected against the spheroid; otherwise spheroid samples are drawn
    /// directly and rejected against the box.
    pub fn sample_informed(&mut self, set: &InformedSet) -> Result<State> {
        if set.c_best < set.c_min {
            return Err(FditError::CostBelowFocalDistance {
                c_best: set.c_best,
                c_min: set.c_min,
            });
        }
        if !set.is_bounded() {
            return Ok(self.sample_uniform());
        }
        if set.spheroid_volume() >= self.bounds.volume() {
            loop {
                let x = self.sample_uniform();
                if set.contains(x.coords()) {
                    return Ok(x);
                }
            }
        }
        loop {
            let x = self.sample_spheroid(set);
            if self.bounds.contains(x.coords()) {
                return Ok(x);
            }
        }
    }

    fn sample_unit_ball(&mut self, n: usize) -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                continue;
            }
            let radius = self.rng.random::<f64>().powf(1.0 / n as f64);
            for c in &mut v {
                *c *= radius / norm;
            }
            return v;
        }
    }

    fn sample_spheroid(&mut self, set: &InformedSet) -> State {
        let n = set.dim();
        let mut u = self.sample_unit_ball(n);
        let transverse = set.c_best / 2.0;
        let conjugate = (set.c_best * set.c_best - set.c_min * set.c_min)
            .max(0.0)
            .sqrt()
            / 2.0;
        u[0] *= transverse;
        for c in &mut u[1..] {
            *c *= conjugate;
        }
        let a = set.focus_a.coords();
        let b = set.focus_b.coords();
        let axis: Vec<f64> = if set.c_min > 0.0 {
            a.iter().zip(b).map(|(x, y)| (y - x) / set.c_min).collect()
        } else {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        };
        let rotated = reflect_first_axis_onto(&u, &axis);
        State(
            rotated
                .iter()
                .zip(a.iter().zip(b))
                .map(|(r, (x, y))| r + 0.5 * (x + y))
                .collect(),
        )
    }
}

/// Applies the Householder reflection that maps the first basis vector onto
/// the unit vector `axis`.
pub(crate) fn reflect_first_axis_onto(v: &[f64], axis: &[f64]) -> Vec<f64> {
    let mut w = axis.iter().map(|a| -a).collect::<Vec<_>>();
    w[0] += 1.0;
    let ww: f64 = w.iter().map(|x| x * x).sum();
    if ww < 1e-24 {
        return v.to_vec();
    }
    let proj: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() * 2.0 / ww;
    v.iter().zip(&w).map(|(x, y)| x - proj * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> State {
        State::from(v)
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(
            euclidean_distance(&s(&[0.0, 0.0]), &s(&[0.0, 0.0])).unwrap(),
            0.0
        );
        assert_eq!(
            euclidean_distance(&s(&[0.0, 0.0]), &s(&[3.0, 4.0])).unwrap(),
            5.0
        );
        assert!(matches!(
            euclidean_distance(&s(&[0.0, 0.0]), &s(&[0.0, 0.0, 1.0])),
            Err(FditError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn euclidean_matches_per_coordinate_accumulation() {
        let mut sampler = Sampler::new(Bounds::unit(8), 3);
        let a = sampler.sample_uniform();
        let b = sampler.sample_uniform();
        let mut acc = 0.0;
        for i in 0..8 {
            acc += (a[i] - b[i]) * (a[i] - b[i]);
        }
        let d = euclidean_distance(&a, &b).unwrap();
        assert!((d - acc.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn elliptical_examples() {
        let o = s(&[0.0, 0.0]);
        let p = s(&[3.0, 4.0]);
        assert_eq!(elliptical_distance(&o, &p, &[1.0, 1.0]).unwrap(), 5.0);
        let d = elliptical_distance(&o, &p, &[3.0, 4.0]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(elliptical_distance(&p, &p, &[0.2, 7.0]).unwrap(), 0.0);
        assert!(elliptical_distance(&o, &p, &[1.0, 0.0]).is_err());
        assert!(elliptical_distance(&o, &p, &[1.0, -2.0]).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(8) - PI.powi(4) / 24.0).abs() < 1e-13);
    }

    #[test]
    fn rgg_radius_examples() {
        let p = RggParams::new(2);
        let r = p.radius(100, 1.0).unwrap();
        // 2 * 1.1 * sqrt(1.5 / pi * ln(100) / 100)
        assert!((r - 0.32622).abs() < 1e-4, "r = {r}");

        let doubled = RggParams { eta: 2.2, ..p };
        assert!((doubled.radius(100, 1.0).unwrap() - 2.0 * r).abs() < 1e-15);

        let rs: Vec<f64> = [3, 10, 100, 1000]
            .iter()
            .map(|&q| p.radius(q, 1.0).unwrap())
            .collect();
        assert!(rs.windows(2).all(|w| w[1] < w[0]), "{rs:?}");

        assert_eq!(p.radius(1, 1.0), Err(FditError::TooFewSamples(1)));
    }

    #[test]
    fn rgg_k_examples() {
        assert_eq!(RggParams::new(4).k(200).unwrap(), 19);
        assert_eq!(RggParams::new(2).k(2).unwrap(), 3);
        assert_eq!(RggParams::new(2).k(0), Err(FditError::TooFewSamples(0)));
    }

    #[test]
    fn rgg_k_is_monotone_over_log_range() {
        for n in [2, 4, 8, 16] {
            let p = RggParams::new(n);
            let mut prev = 0;
            for i in 0..=600 {
                let q = (2.0 * 10f64.powf(i as f64 / 100.0)).round() as usize;
                let q = q.clamp(2, 1_000_000);
                let k = p.k(q).unwrap();
                assert!(k >= prev, "n={n} q={q}");
                prev = k;
            }
        }
    }

    #[test]
    fn uniform_sampling_is_reproducible_and_bounded() {
        let mut a = Sampler::new(Bounds::unit(3), 11);
        let mut b = Sampler::new(Bounds::unit(3), 11);
        for _ in 0..100 {
            let x = a.sample_uniform();
            assert_eq!(x, b.sample_uniform());
            assert!(Bounds::unit(3).contains(x.coords()));
        }
    }

    #[test]
    fn uniform_sampling_fills_quadrants() {
        let mut sampler = Sampler::new(Bounds::unit(2), 5);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let x = sampler.sample_uniform();
            let q = (x[0] >= 0.5) as usize + 2 * (x[1] >= 0.5) as usize;
            counts[q] += 1;
        }
        for c in counts {
            assert!((2300..=2700).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn informed_measure_examples() {
        let start = s(&[0.1, 0.5]);
        let goal = s(&[0.9, 0.5]);
        let unbounded = InformedSet::new(start.clone(), goal.clone(), f64::INFINITY).unwrap();
        assert_eq!(informed_measure(&unbounded, &Bounds::unit(2)), 1.0);

        let set = InformedSet::new(start.clone(), goal.clone(), 1.0).unwrap();
        let expected = std::f64::consts::PI * 0.5 * 0.3;
        assert!((set.spheroid_volume() - expected).abs() < 1e-12);
        assert!((informed_measure(&set, &Bounds::unit(2)) - expected).abs() < 1e-12);

        let tight = InformedSet::new(start.clone(), goal.clone(), 0.8).unwrap();
        assert_eq!(informed_measure(&tight, &Bounds::unit(2)), MEASURE_FLOOR);

        assert!(matches!(
            InformedSet::new(start, goal, 0.5),
            Err(FditError::CostBelowFocalDistance { .. })
        ));
    }

    #[test]
    fn informed_samples_stay_in_spheroid() {
        let start = s(&[0.1, 0.2, 0.3, 0.1]);
        let goal = s(&[0.9, 0.7, 0.6, 0.8]);
        let c_min = euclidean_distance(&start, &goal).unwrap();
        let set = InformedSet::new(start.clone(), goal.clone(), c_min * 1.2).unwrap();
        let mut sampler = Sampler::new(Bounds::unit(4), 9);
        for _ in 0..10_000 {
            let x = sampler.sample_informed(&set).unwrap();
            assert!(set.cost_lower_bound(x.coords()) <= set.c_best() + 1e-9);
            assert!(Bounds::unit(4).contains(x.coords()));
        }
    }

    #[test]
    fn near_degenerate_informed_set_hugs_segment() {
        let start = s(&[0.1, 0.5, 0.5]);
        let goal = s(&[0.9, 0.5, 0.5]);
        let eps = 1e-6;
        let set = InformedSet::new(start, goal, 0.8 + eps).unwrap();
        let mut sampler = Sampler::new(Bounds::unit(3), 2);
        let c_best: f64 = 0.8 + eps;
        let minor = (c_best * c_best - 0.64).sqrt() / 2.0;
        for _ in 0..1000 {
            let x = sampler.sample_informed(&set).unwrap();
            // axial overshoot past either focus is at most eps/2, the
            // perpendicular offset at most the minor semi-axis
            let overshoot = (0.1 - x[0]).max(x[0] - 0.9).max(0.0);
            let perp = ((x[1] - 0.5).powi(2) + (x[2] - 0.5).powi(2)).sqrt();
            assert!(overshoot <= eps / 2.0 + 1e-12, "overshoot = {overshoot}");
            assert!(perp <= minor + 1e-12, "perp = {perp}");
        }
    }

    #[test]
    fn unbounded_informed_equals_uniform() {
        let set = InformedSet::new(s(&[0.1, 0.1]), s(&[0.9, 0.9]), f64::INFINITY).unwrap();
        let mut a = Sampler::new(Bounds::unit(2), 1);
        let mut b = Sampler::new(Bounds::unit(2), 1);
        for _ in 0..50 {
            assert_eq!(a.sample_informed(&set).unwrap(), b.sample_uniform());
        }
    }

    #[test]
    fn householder_maps_first_axis() {
        let axis = [0.6, 0.8, 0.0];
        let r = reflect_first_axis_onto(&[1.0, 0.0, 0.0], &axis);
        for (x, y) in r.iter().zip(axis) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
