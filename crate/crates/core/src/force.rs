//! n-dimensional Coulomb forces over charged samples.
//!
//! Valid samples carry positive charge and attract the query state; invalid
//! samples carry negative charge and repel it. The magnitude between two
//! charges at distance `r` in `n` dimensions falls off as `r^-(n-1)`.
//!
//! Besides the resultant used to orient the elliptical neighbour search
//! ([`compute_force_direction`]), this module exposes the scalar
//! potential/force pairs of the synthetic guidance field and their
//! many-sample sums.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, FditError, Result};
use crate::space::{dist, State};

/// Pairs closer than this are treated as coincident.
pub const COINCIDENCE_EPS: f64 = 1e-12;

/// Sign of a sample's charge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// A collision-free sample.
    Positive,
    /// A sample inside an obstacle.
    Negative,
}

impl Polarity {
    pub fn from_validity(valid: bool) -> Self {
        if valid {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    pub fn is_valid(self) -> bool {
        self == Polarity::Positive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargedSample {
    pub state: State,
    pub polarity: Polarity,
}

impl ChargedSample {
    pub fn new(state: State, polarity: Polarity) -> Self {
        ChargedSample { state, polarity }
    }

    pub fn valid(state: State) -> Self {
        Self::new(state, Polarity::Positive)
    }

    pub fn invalid(state: State) -> Self {
        Self::new(state, Polarity::Negative)
    }
}

/// Coefficients of the charge model. Every sample carries unit charge by
/// default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChargeModel {
    /// Coulomb constant analogue.
    pub k_e: f64,
    pub q_valid: f64,
    pub q_invalid: f64,
    /// Attractive potential coefficient.
    pub k_a: f64,
    /// Repulsive potential coefficient.
    pub k_r: f64,
    /// Range beyond which an invalid sample exerts no repulsion.
    pub rho0: f64,
}

impl Default for ChargeModel {
    fn default() -> Self {
        ChargeModel {
            k_e: 1.0,
            q_valid: 1.0,
            q_invalid: 1.0,
            k_a: 1.0,
            k_r: 1.0,
            rho0: 1.0,
        }
    }
}

impl ChargeModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k_e", self.k_e),
            ("q_valid", self.q_valid),
            ("q_invalid", self.q_invalid),
            ("k_a", self.k_a),
            ("k_r", self.k_r),
            ("rho0", self.rho0),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid_param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn with_rho0(self, rho0: f64) -> Self {
        ChargeModel { rho0, ..self }
    }

    fn charge(&self, polarity: Polarity) -> f64 {
        match polarity {
            Polarity::Positive => self.q_valid,
            Polarity::Negative => self.q_invalid,
        }
    }

    /// Median magnitude of a single pair force at distance `r` in `n`
    /// dimensions.
    pub fn reference_magnitude(&self, r: f64, n: usize) -> f64 {
        // median of the two charge magnitudes
        let q = 0.5 * (self.q_valid + self.q_invalid);
        self.k_e * q / r.powi(n as i32 - 1)
    }
}

/// An n-dimensional force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForceVector(Vec<f64>);

impl ForceVector {
    pub fn zeros(n: usize) -> Self {
        ForceVector(vec![0.0; n])
    }

    /// The all-ones vector that seeds the refinement loop.
    pub fn ones(n: usize) -> Self {
        ForceVector(vec![1.0; n])
    }

    pub fn new(components: Vec<f64>) -> Self {
        ForceVector(components)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn add_scaled(&mut self, v: &[f64], s: f64) {
        for (a, b) in self.0.iter_mut().zip(v) {
            *a += s * b;
        }
    }

    /// Unit vector along the force, or `None` for a (numerically) zero force.
    pub fn direction(&self) -> Option<Vec<f64>> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        Some(self.0.iter().map(|x| x / norm).collect())
    }
}

impl std::ops::Index<usize> for ForceVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn separation(x: &[f64], other: &[f64]) -> Result<(Vec<f64>, f64)> {
    if x.len() != other.len() {
        return Err(FditError::DimensionMismatch {
            expected: x.len(),
            got: other.len(),
        });
    }
    let r = dist(x, other);
    if r < COINCIDENCE_EPS {
        return Err(FditError::CoincidentCharges(r));
    }
    let diff = other.iter().zip(x).map(|(o, p)| o - p).collect();
    Ok((diff, r))
}

/// Force exerted on `x` by a single charged sample.
///
/// A valid sample pulls `x` towards it with magnitude
/// `k_e q_valid / r^(n-1)`; an invalid sample pushes it away with magnitude
/// `k_e q_invalid / r^(n-1)`.
pub fn pair_force(x: &State, xi: &ChargedSample, model: &ChargeModel) -> Result<ForceVector> {
    let (diff, r) = separation(x.coords(), xi.state.coords())?;
    let n = x.dim();
    let mut f = ForceVector::zeros(n);
    f.add_scaled(&diff, signed_magnitude(model, xi.polarity, r, n) / r);
    Ok(f)
}

#[inline]
fn signed_magnitude(model: &ChargeModel, polarity: Polarity, r: f64, n: usize) -> f64 {
    let m = model.k_e * model.charge(polarity) / r.powi(n as i32 - 1);
    match polarity {
        Polarity::Positive => m,
        Polarity::Negative => -m,
    }
}

/// Resultant force plus the number of coincident samples that were skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct Resultant {
    pub force: ForceVector,
    pub skipped: usize,
}

/// Accumulates pair forces from `(coords, polarity)` pairs onto `x`.
pub fn resultant_force<'a, I>(x: &[f64], charges: I, model: &ChargeModel) -> Resultant
where
    I: IntoIterator<Item = (&'a [f64], Polarity)>,
{
    let n = x.len();
    let mut force = ForceVector::zeros(n);
    let mut skipped = 0;
    for (p, polarity) in charges {
        let r = dist(x, p);
        if r < COINCIDENCE_EPS {
            skipped += 1;
            continue;
        }
        let s = signed_magnitude(model, polarity, r, n) / r;
        for ((f, a), b) in force.0.iter_mut().zip(p).zip(x) {
            *f += s * (a - b);
        }
    }
    Resultant { force, skipped }
}

/// Vector sum of [`pair_force`] over `neighbors`; zero for an empty list.
/// Coincident neighbours are skipped and counted.
pub fn compute_force_direction(
    x: &State,
    neighbors: &[ChargedSample],
    model: &ChargeModel,
) -> Resultant {
    resultant_force(
        x.coords(),
        neighbors.iter().map(|c| (c.state.coords(), c.polarity)),
        model,
    )
}

/// Fraction of invalid samples; zero for an empty set.
pub fn charge_ratio<I>(polarities: I) -> f64
where
    I: IntoIterator<Item = Polarity>,
{
    let (mut total, mut invalid) = (0usize, 0usize);
    for p in polarities {
        total += 1;
        if p == Polarity::Negative {
            invalid += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        invalid as f64 / total as f64
    }
}

/// `k_a / |x - x_pos|^2`.
pub fn attractive_potential(x: &State, x_pos: &State, model: &ChargeModel) -> Result<f64> {
    let (_, r) = separation(x.coords(), x_pos.coords())?;
    Ok(model.k_a / (r * r))
}

/// `k_a (x - x_pos) / |x - x_pos|^3`, with the sign convention as printed for
/// the guidance field (it points from `x_pos` towards `x`).
pub fn attractive_force(x: &State, x_pos: &State, model: &ChargeModel) -> Result<ForceVector> {
    let (diff, r) = separation(x.coords(), x_pos.coords())?;
    // diff = x_pos - x
    Ok(ForceVector(
        diff.iter().map(|d| -model.k_a * d / (r * r * r)).collect(),
    ))
}

/// `-k_r / |x - x_neg|^2` within `rho0`, zero beyond it. Not continuous at
/// the cutoff.
pub fn repulsive_potential(x: &State, x_neg: &State, model: &ChargeModel) -> Result<f64> {
    let (_, r) = separation(x.coords(), x_neg.coords())?;
    if r <= model.rho0 {
        Ok(-model.k_r / (r * r))
    } else {
        Ok(0.0)
    }
}

/// `-k_r (x - x_neg) / |x - x_neg|^3` within `rho0`, zero beyond it.
pub fn repulsive_force(x: &State, x_neg: &State, model: &ChargeModel) -> Result<ForceVector> {
    let (diff, r) = separation(x.coords(), x_neg.coords())?;
    if r > model.rho0 {
        return Ok(ForceVector::zeros(x.dim()));
    }
    Ok(ForceVector(
        diff.iter().map(|d| model.k_r * d / (r * r * r)).collect(),
    ))
}

fn aggregate(x: &State, samples: &[State], model: &ChargeModel, sign: f64) -> ForceVector {
    let n = x.dim();
    let mut f = ForceVector::zeros(n);
    for s in samples {
        let r = dist(x.coords(), s.coords());
        if r < COINCIDENCE_EPS {
            continue;
        }
        // unit charges on both ends, unnormalised separation over r^n
        let scale = sign * model.k_e / r.powi(n as i32);
        for ((fi, p), xi) in f.0.iter_mut().zip(s.coords()).zip(x.coords()) {
            *fi += scale * (p - xi);
        }
    }
    f
}

/// `k_e sum_i (x_pos_i - x) / |x - x_pos_i|^n` over unit charges.
pub fn aggregate_attractive_force(
    x: &State,
    valid_samples: &[State],
    model: &ChargeModel,
) -> ForceVector {
    aggregate(x, valid_samples, model, 1.0)
}

/// `-k_e sum_j (x_neg_j - x) / |x - x_neg_j|^n` over unit charges.
pub fn aggregate_repulsive_force(
    x: &State,
    invalid_samples: &[State],
    model: &ChargeModel,
) -> ForceVector {
    aggregate(x, invalid_samples, model, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(v: &[f64]) -> State {
        State::from(v)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn pair_force_examples() {
        let m = ChargeModel::default();
        let f = pair_force(&st(&[0.0, 0.0]), &ChargedSample::valid(st(&[1.0, 0.0])), &m).unwrap();
        assert_eq!(f.components(), &[1.0, 0.0]);
        let f = pair_force(
            &st(&[0.0, 0.0]),
            &ChargedSample::invalid(st(&[0.0, 1.0])),
            &m,
        )
        .unwrap();
        assert_eq!(f.components(), &[0.0, -1.0]);
        let f = pair_force(
            &st(&[0.0; 4]),
            &ChargedSample::valid(st(&[0.0, 2.0, 0.0, 0.0])),
            &m,
        )
        .unwrap();
        assert!((f.norm() - 0.125).abs() < 1e-15);
        assert!(matches!(
            pair_force(&st(&[0.3, 0.3]), &ChargedSample::valid(st(&[0.3, 0.3])), &m),
            Err(FditError::CoincidentCharges(_))
        ));
    }

    #[test]
    fn resultant_examples() {
        let m = ChargeModel::default();
        let x = st(&[0.0, 0.0]);
        let r = compute_force_direction(
            &x,
            &[
                ChargedSample::valid(st(&[1.0, 0.0])),
                ChargedSample::valid(st(&[-1.0, 0.0])),
            ],
            &m,
        );
        assert_eq!(r.force.components(), &[0.0, 0.0]);
        assert_eq!(
            compute_force_direction(&x, &[], &m).force,
            ForceVector::zeros(2)
        );

        let one = ChargedSample::valid(st(&[0.3, -0.7]));
        let r = compute_force_direction(&x, std::slice::from_ref(&one), &m);
        assert_eq!(r.force, pair_force(&x, &one, &m).unwrap());

        let r = compute_force_direction(&x, &[ChargedSample::valid(x.clone()), one.clone()], &m);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.force, pair_force(&x, &one, &m).unwrap());
    }

    #[test]
    fn charge_ratio_examples() {
        use Polarity::*;
        let mut v = vec![Positive; 8];
        v.extend([Negative, Negative]);
        assert!((charge_ratio(v) - 0.2).abs() < 1e-15);
        assert_eq!(charge_ratio(vec![Positive; 5]), 0.0);
        assert_eq!(charge_ratio(Vec::new()), 0.0);
    }

    #[test]
    fn attractive_examples() {
        let m = ChargeModel::default();
        let o = st(&[0.0, 0.0]);
        assert_eq!(attractive_potential(&st(&[1.0, 0.0]), &o, &m).unwrap(), 1.0);
        assert_eq!(
            attractive_potential(&st(&[0.0, 2.0]), &o, &m).unwrap(),
            0.25
        );
        let m2 = ChargeModel { k_a: 2.0, ..m };
        assert_eq!(
            attractive_potential(&st(&[0.0, 2.0]), &o, &m2).unwrap(),
            0.5
        );
        assert!(attractive_potential(&o, &o, &m).is_err());

        let f = attractive_force(&st(&[1.0, 0.0]), &o, &m).unwrap();
        assert_eq!(f.components(), &[1.0, 0.0]);
        let f = attractive_force(&st(&[0.0, 2.0]), &o, &m).unwrap();
        assert!((f.norm() - 0.25).abs() < 1e-15);
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn repulsive_examples() {
        let m = ChargeModel {
            rho0: 2.0,
            ..ChargeModel::default()
        };
        let o = st(&[0.0, 0.0]);
        assert_eq!(repulsive_potential(&st(&[3.0, 0.0]), &o, &m).unwrap(), 0.0);
        assert_eq!(repulsive_potential(&st(&[1.0, 0.0]), &o, &m).unwrap(), -1.0);
        // jump at the cutoff
        let inside = repulsive_potential(&st(&[2.0, 0.0]), &o, &m).unwrap();
        let outside = repulsive_potential(&st(&[2.0 + 1e-9, 0.0]), &o, &m).unwrap();
        assert!((inside + 0.25).abs() < 1e-15);
        assert_eq!(outside, 0.0);

        assert_eq!(
            repulsive_force(&st(&[3.0, 0.0]), &o, &m).unwrap(),
            ForceVector::zeros(2)
        );
        let f = repulsive_force(&st(&[1.0, 0.0]), &o, &m).unwrap();
        assert_eq!(f.components(), &[-1.0, 0.0]);
    }

    #[test]
    fn repulsive_inverse_square_decay() {
        let m = ChargeModel {
            rho0: 10.0,
            ..ChargeModel::default()
        };
        let o = st(&[0.0, 0.0, 0.0]);
        let mags: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&r| repulsive_force(&st(&[r, 0.0, 0.0]), &o, &m).unwrap().norm())
            .collect();
        let slope1 = (mags[1] / mags[0]).ln() / 2f64.ln();
        let slope2 = (mags[2] / mags[1]).ln() / 2f64.ln();
        assert!((slope1 + 2.0).abs() < 1e-9);
        assert!((slope2 + 2.0).abs() < 1e-9);
    }

    #[test]
    fn aggregates_match_pair_forces() {
        let m = ChargeModel::default();
        let x = st(&[0.2, 0.1, 0.7]);
        assert_eq!(
            aggregate_attractive_force(&x, &[], &m),
            ForceVector::zeros(3)
        );
        assert_eq!(
            aggregate_repulsive_force(&x, &[], &m),
            ForceVector::zeros(3)
        );

        let p = st(&[0.5, 0.9, 0.1]);
        let a = aggregate_attractive_force(&x, std::slice::from_ref(&p), &m);
        let pair = pair_force(&x, &ChargedSample::valid(p.clone()), &m).unwrap();
        assert!(close(a.components(), pair.components(), 1e-12));
        let r = aggregate_repulsive_force(&x, std::slice::from_ref(&p), &m);
        assert!(close(
            r.components(),
            &a.components().iter().map(|v| -v).collect::<Vec<_>>(),
            0.0
        ));

        let m3 = ChargeModel { k_e: 3.0, ..m };
        let a3 = aggregate_attractive_force(&x, std::slice::from_ref(&p), &m3);
        assert!(close(
            a3.components(),
            &a.components().iter().map(|v| 3.0 * v).collect::<Vec<_>>(),
            1e-12
        ));
    }

    #[test]
    fn model_validation() {
        assert!(ChargeModel::default().validate().is_ok());
        assert!(ChargeModel {
            k_r: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ChargeModel {
            rho0: f64::NAN,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
