//! Obstacle worlds built from axis-aligned hyperrectangles, state and motion
//! validity checking, and generators for the dividing-wall and
//! random-rectangles benchmark families.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, FditError, Result};
use crate::space::{dist, Bounds, State};

/// Schema version written into environment files.
pub const ENVIRONMENT_SCHEMA_VERSION: u32 = 1;

/// Default interpolation step for motion validation.
pub const DEFAULT_CHECK_RESOLUTION: f64 = 0.001;

/// Closed axis-aligned box. Only its interior is in collision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperRectangle {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl HyperRectangle {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(FditError::DimensionMismatch {
                expected: min.len(),
                got: max.len(),
            });
        }
        if min.iter().zip(&max).any(|(lo, hi)| !(lo <= hi)) {
            return Err(invalid_param("rectangle", "min corner exceeds max corner"));
        }
        Ok(HyperRectangle { min, max })
    }

    /// Whether some point of the closed segment `ab` lies strictly inside.
    pub fn segment_enters(&self, a: &[f64], b: &[f64]) -> bool {
        // open parameter interval (lo, hi) where the segment is inside
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..a.len() {
            let d = b[i] - a[i];
            if d == 0.0 {
                if !(a[i] > self.min[i] && a[i] < self.max[i]) {
                    return false;
                }
                continue;
            }
            let t0 = (self.min[i] - a[i]) / d;
            let t1 = (self.max[i] - a[i]) / d;
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
        lo < hi && lo < 1.0 && hi > 0.0
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// True iff `x` lies strictly inside the box.
    #[inline]
    pub fn contains_strict(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *v > *lo && *v < *hi)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// A planning problem: bounds, obstacles, start, goal and the motion-check
/// resolution. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    dimension: usize,
    bounds: Bounds,
    obstacles: Vec<HyperRectangle>,
    start: State,
    goal: State,
    check_resolution: f64,
}

#[derive(Serialize, Deserialize)]
struct EnvironmentFile {
    schema_version: u32,
    #[serde(flatten)]
    env: Environment,
}

impl Environment {
    pub fn new(
        bounds: Bounds,
        obstacles: Vec<HyperRectangle>,
        start: State,
        goal: State,
        check_resolution: f64,
    ) -> Result<Self> {
        let dimension = bounds.dim();
        if dimension < 2 {
            return Err(FditError::DimensionTooSmall(dimension));
        }
        for d in [start.dim(), goal.dim(), bounds.upper.len()]
            .into_iter()
            .chain(obstacles.iter().flat_map(|o| [o.min.len(), o.max.len()]))
        {
            if d != dimension {
                return Err(FditError::DimensionMismatch {
                    expected: dimension,
                    got: d,
                });
            }
        }
        if !(check_resolution > 0.0) || !check_resolution.is_finite() {
            return Err(invalid_param(
                "check_resolution",
                format!("must be > 0, got {check_resolution}"),
            ));
        }
        for o in &obstacles {
            if !bounds.contains(&o.min) || !bounds.contains(&o.max) {
                return Err(invalid_param("obstacles", "obstacle extends beyond bounds"));
            }
            if o.min.iter().zip(&o.max).any(|(lo, hi)| !(lo <= hi)) {
                return Err(invalid_param("obstacles", "min corner exceeds max corner"));
            }
        }
        let env = Environment {
            dimension,
            bounds,
            obstacles,
            start,
            goal,
            check_resolution,
        };
        if !env.is_state_valid(env.start.coords()) {
            return Err(invalid_param("start", "start state is in collision"));
        }
        if !env.is_state_valid(env.goal.coords()) {
            return Err(invalid_param("goal", "goal state is in collision"));
        }
        Ok(env)
    }

    /// Obstacle-free unit hypercube with the given start and goal.
    pub fn free(start: State, goal: State) -> Result<Self> {
        let n = start.dim();
        Environment::new(
            Bounds::unit(n),
            Vec::new(),
            start,
            goal,
            DEFAULT_CHECK_RESOLUTION,
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn obstacles(&self) -> &[HyperRectangle] {
        &self.obstacles
    }

    pub fn start(&self) -> &State {
        &self.start
    }

    pub fn goal(&self) -> &State {
        &self.goal
    }

    pub fn check_resolution(&self) -> f64 {
        self.check_resolution
    }

    pub fn with_check_resolution(&self, check_resolution: f64) -> Result<Self> {
        Environment::new(
            self.bounds.clone(),
            self.obstacles.clone(),
            self.start.clone(),
            self.goal.clone(),
            check_resolution,
        )
    }

    /// Valid iff inside the bounds and not strictly inside any obstacle.
    /// Obstacle faces belong to free space.
    #[inline]
    pub fn is_state_valid(&self, x: &[f64]) -> bool {
        self.bounds.contains(x) && !self.obstacles.iter().any(|o| o.contains_strict(x))
    }

    pub fn is_motion_valid(&self, a: &[f64], b: &[f64]) -> bool {
        self.motion_check(a, b, self.check_resolution).0
    }

    pub fn is_motion_valid_at(&self, a: &[f64], b: &[f64], resolution: f64) -> bool {
        self.motion_check(a, b, resolution).0
    }

    /// Checks the segment `ab` at `2^j` equal subdivisions, the smallest power
    /// of two giving spacing at most `resolution`; both endpoints are checked.
    /// The endpoints are ordered lexicographically first so the result is
    /// symmetric, and power-of-two subdivision nests when the resolution is
    /// halved. Returns the verdict and the number of states examined.
    pub fn motion_check(&self, a: &[f64], b: &[f64], resolution: f64) -> (bool, u64) {
        let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
        let length = dist(a, b);
        let mut steps: u64 = 1;
        while length / (steps as f64) > resolution {
            steps *= 2;
        }
        let mut point = vec![0.0; a.len()];
        let mut checked = 0;
        // Endpoints first, then interior in sequence.
        for x in [a, b] {
            checked += 1;
            if !self.is_state_valid(x) {
                return (false, checked);
            }
        }
        for i in 1..steps {
            let t = i as f64 / steps as f64;
            for ((p, x), y) in point.iter_mut().zip(a).zip(b) {
                *p = x + t * (y - x);
            }
            checked += 1;
            if !self.is_state_valid(&point) {
                return (false, checked);
            }
        }
        (true, checked)
    }

    /// Exact test that the closed segment `ab` misses the interior of every
    /// obstacle. Passing it implies validity at every check resolution.
    pub fn segment_clear(&self, a: &[f64], b: &[f64]) -> bool {
        self.obstacles.iter().all(|o| !o.segment_enters(a, b))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let file = EnvironmentFile {
            schema_version: ENVIRONMENT_SCHEMA_VERSION,
            env: self.clone(),
        };
        toml::to_string(&file).map_err(|e| FditError::Config(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: EnvironmentFile =
            toml::from_str(s).map_err(|e| FditError::Config(e.to_string()))?;
        if file.schema_version != ENVIRONMENT_SCHEMA_VERSION {
            return Err(FditError::Config(format!(
                "unsupported environment schema version {}",
                file.schema_version
            )));
        }
        let e = file.env;
        Environment::new(e.bounds, e.obstacles, e.start, e.goal, e.check_resolution)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Environment::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// An opening in the dividing wall along the second axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// Lower edge of the opening along axis 2.
    pub position: f64,
    pub width: f64,
}

/// Parameters of a dividing-wall world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DividingWallSpec {
    pub thickness: f64,
    pub gaps: Vec<Gap>,
}

impl Default for DividingWallSpec {
    /// Seven openings with widths 0.03, 0.12, 0.125, 0.01, 0.05, 0.1, 0.05 in
    /// a wall of thickness 0.1. The straight start-goal line at 0.5 is
    /// blocked.
    fn default() -> Self {
        let gaps = [
            (0.04, 0.03),
            (0.12, 0.12),
            (0.29, 0.125),
            (0.47, 0.01),
            (0.55, 0.05),
            (0.66, 0.1),
            (0.84, 0.05),
        ]
        .into_iter()
        .map(|(position, width)| Gap { position, width })
        .collect();
        DividingWallSpec {
            thickness: 0.1,
            gaps,
        }
    }
}

/// A wall slab of the given thickness centred at 0.5 on axis 1, spanning
/// every other axis, pierced by `gaps` along axis 2. Start is
/// (0.1, 0.5, ..., 0.5), goal is (0.9, 0.5, ..., 0.5).
pub fn make_dividing_wall(n: usize, gaps: &[Gap], wall_thickness: f64) -> Result<Environment> {
    if n < 2 {
        return Err(FditError::DimensionTooSmall(n));
    }
    if !(wall_thickness > 0.0 && wall_thickness < 0.8) {
        return Err(invalid_param(
            "wall_thickness",
            format!("must lie in (0, 0.8), got {wall_thickness}"),
        ));
    }
    let mut sorted = gaps.to_vec();
    for g in &sorted {
        if !(g.width > 0.0) || g.position < 0.0 || g.position + g.width > 1.0 {
            return Err(invalid_param(
                "gaps",
                format!(
                    "gap [{}, {}] is not inside [0, 1]",
                    g.position,
                    g.position + g.width
                ),
            ));
        }
    }
    sorted.sort_by(|a, b| a.position.total_cmp(&b.position));
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.position + a.width > b.position {
            return Err(FditError::OverlappingGaps {
                a_lo: a.position,
                a_hi: a.position + a.width,
                b_lo: b.position,
                b_hi: b.position + b.width,
            });
        }
    }

    let x_lo = 0.5 - wall_thickness / 2.0;
    let x_hi = 0.5 + wall_thickness / 2.0;
    let mut obstacles = Vec::new();
    let mut lower = 0.0;
    let mut push_piece = |lo: f64, hi: f64| {
        if hi > lo {
            let mut min = vec![0.0; n];
            let mut max = vec![1.0; n];
            min[0] = x_lo;
            max[0] = x_hi;
            min[1] = lo;
            max[1] = hi;
            obstacles.push(HyperRectangle { min, max });
        }
    };
    for g in &sorted {
        push_piece(lower, g.position);
        lower = g.position + g.width;
    }
    push_piece(lower, 1.0);

    let mut start = vec![0.5; n];
    let mut goal = vec![0.5; n];
    start[0] = 0.1;
    goal[0] = 0.9;
    Environment::new(
        Bounds::unit(n),
        obstacles,
        State::new(start),
        State::new(goal),
        DEFAULT_CHECK_RESOLUTION,
    )
}

/// The dividing wall with the default gap layout.
pub fn default_dividing_wall(n: usize) -> Result<Environment> {
    let spec = DividingWallSpec::default();
    make_dividing_wall(n, &spec.gaps, spec.thickness)
}

/// Upper limit on resampling a rectangle that covers start or goal.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// `count` boxes with per-axis widths uniform in `width_range` and centres
/// uniform in the unit cube (clipped to the cube). Boxes containing start
/// (0.1, ..., 0.1) or goal (0.9, ..., 0.9) are redrawn.
pub fn make_random_rectangles(
    n: usize,
    count: usize,
    width_range: (f64, f64),
    seed: u64,
) -> Result<Environment> {
    if n < 2 {
        return Err(FditError::DimensionTooSmall(n));
    }
    let (w_min, w_max) = width_range;
    if !(w_min > 0.0 && w_min <= w_max && w_max < 1.0) {
        return Err(invalid_param(
            "width_range",
            format!("need 0 < w_min <= w_max < 1, got ({w_min}, {w_max})"),
        ));
    }
    let start = vec![0.1; n];
    let goal = vec![0.9; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obstacles = Vec::with_capacity(count);
    for index in 0..count {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let mut min = Vec::with_capacity(n);
            let mut max = Vec::with_capacity(n);
            for _ in 0..n {
                let w = rng.random_range(w_min..=w_max);
                let c: f64 = rng.random();
                min.push((c - w / 2.0).max(0.0));
                max.push((c + w / 2.0).min(1.0));
            }
            let rect = HyperRectangle { min, max };
            if !rect.contains_strict(&start) && !rect.contains_strict(&goal) {
                placed = Some(rect);
                break;
            }
        }
        match placed {
            Some(r) => obstacles.push(r),
            None => {
                return Err(FditError::PlacementFailed {
                    index,
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                })
            }
        }
    }
    Environment::new(
        Bounds::unit(n),
        obstacles,
        State::new(start),
        State::new(goal),
        DEFAULT_CHECK_RESOLUTION,
    )
}
