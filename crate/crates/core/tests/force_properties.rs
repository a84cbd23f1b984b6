use fdit::force::{
    aggregate_attractive_force, aggregate_repulsive_force, attractive_force,
    compute_force_direction, pair_force, repulsive_force, resultant_force,
};
use fdit::{ChargeModel, ChargedSample, Polarity, State};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
        .collect()
}

/// Orthogonal matrix from Gram-Schmidt on a Gaussian matrix, stored by rows.
fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (vi, ri) in v.iter_mut().zip(r) {
                *vi -= d * ri;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.iter().map(|a| a / norm).collect());
        }
    }
    rows
}

fn apply(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn charges(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<ChargedSample> {
    (0..count)
        .map(|_| {
            let p = random_point(rng, n, 1.0);
            ChargedSample::new(State::new(p), Polarity::from_validity(rng.random::<bool>()))
        })
        .collect()
}

/// Sum of pair-force magnitudes: the rounding scale of the resultant.
fn magnitude_scale(x: &State, neighbors: &[ChargedSample], model: &ChargeModel) -> f64 {
    neighbors
        .iter()
        .filter_map(|c| pair_force(x, c, model).ok())
        .map(|f| f.norm())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(4usize), Just(8usize)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rotation_equivariance(seed in any::<u64>(), n in dims(), count in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ChargeModel::default();
        let x = State::new(random_point(&mut rng, n, 1.0));
        let neighbors = charges(&mut rng, n, count);
        let rot = random_rotation(&mut rng, n);
        let base = compute_force_direction(&x, &neighbors, &model).force;
        let rx = State::new(apply(&rot, x.coords()));
        let rotated: Vec<ChargedSample> = neighbors
            .iter()
            .map(|c| ChargedSample::new(State::new(apply(&rot, c.state.coords())), c.polarity))
            .collect();
        let got = compute_force_direction(&rx, &rotated, &model).force;
        let want = apply(&rot, base.components());
        let scale = magnitude_scale(&x, &neighbors, &model);
        prop_assert!(max_abs_diff(got.components(), &want) <= 1e-9 * scale);
    }

    #[test]
    fn translation_invariance(seed in any::<u64>(), n in dims(), count in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ChargeModel::default();
        let x = State::new(random_point(&mut rng, n, 1.0));
        let neighbors = charges(&mut rng, n, count);
        // shift by a dyadic vector so translated coordinates stay exact
        let shift: Vec<f64> = (0..n).map(|_| (rng.random_range(-64i32..64) as f64) / 8.0).collect();
        let moved = |p: &[f64]| State::new(p.iter().zip(&shift).map(|(a, s)| a + s).collect());
        let base = compute_force_direction(&x, &neighbors, &model).force;
        let shifted: Vec<ChargedSample> =
            neighbors.iter().map(|c| ChargedSample::new(moved(c.state.coords()), c.polarity)).collect();
        let got = compute_force_direction(&moved(x.coords()), &shifted, &model).force;
        let scale = magnitude_scale(&x, &neighbors, &model);
        prop_assert!(max_abs_diff(got.components(), base.components()) <= 1e-12 * scale);
    }

    #[test]
    fn magnitude_follows_inverse_power(seed in any::<u64>(), n in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ChargeModel::default();
        let dir = {
            let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / norm).collect::<Vec<f64>>()
        };
        let x = State::new(random_point(&mut rng, n, 1.0));
        // least-squares slope of log |F| against log r over r in [0.1, 10]
        let pts: Vec<(f64, f64)> = (0..25)
            .map(|i| {
                let r = 0.1 * 100f64.powf(i as f64 / 24.0);
                let p: Vec<f64> = x.coords().iter().zip(&dir).map(|(a, d)| a + r * d).collect();
                let f = pair_force(&x, &ChargedSample::valid(State::new(p)), &model).unwrap();
                (r.ln(), f.norm().ln())
            })
            .collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let cov: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        prop_assert!((cov / var + (n as f64 - 1.0)).abs() <= 1e-6);
    }

    #[test]
    fn pair_force_sign(seed in any::<u64>(), n in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ChargeModel::default();
        let x = State::new(random_point(&mut rng, n, 1.0));
        let p = random_point(&mut rng, n, 1.0);
        let toward: Vec<f64> = p.iter().zip(x.coords()).map(|(a, b)| a - b).collect();
        let attract = pair_force(&x, &ChargedSample::valid(State::new(p.clone())), &model).unwrap();
        let repel = pair_force(&x, &ChargedSample::invalid(State::new(p)), &model).unwrap();
        prop_assert!(attract.dot(&toward) > 0.0);
        prop_assert!(repel.dot(&toward) < 0.0);
    }

    #[test]
    fn aggregates_sum_to_resultant(seed in any::<u64>(), n in dims(), count in 0usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ChargeModel::default();
        let x = State::new(random_point(&mut rng, n, 1.0));
        let neighbors = charges(&mut rng, n, count);
        let pos: Vec<State> = neighbors.iter().filter(|c| c.polarity.is_valid()).map(|c| c.state.clone()).collect();
        let neg: Vec<State> = neighbors.iter().filter(|c| !c.polarity.is_valid()).map(|c| c.state.clone()).collect();
        let a = aggregate_attractive_force(&x, &pos, &model);
        let r = aggregate_repulsive_force(&x, &neg, &model);
        let sum: Vec<f64> = a.components().iter().zip(r.components()).map(|(p, q)| p + q).collect();
        let want = compute_force_direction(&x, &neighbors, &model).force;
        let scale = magnitude_scale(&x, &neighbors, &model);
        prop_assert!(max_abs_diff(&sum, want.components()) <= 1e-12 * scale);
    }
}

/// Naive re-derivation: unit vector times signed charge over r^(n-1).
#[test]
fn resultant_matches_naive_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = ChargeModel::default();
    for _ in 0..100 {
        let n = 8;
        let x = random_point(&mut rng, n, 1.0);
        let neighbors = charges(&mut rng, n, 50);
        let mut want = vec![0.0; n];
        for c in &neighbors {
            let d: Vec<f64> = c
                .state
                .coords()
                .iter()
                .zip(&x)
                .map(|(a, b)| a - b)
                .collect();
            let r = d.iter().map(|a| a * a).sum::<f64>().sqrt();
            let sign = if c.polarity.is_valid() { 1.0 } else { -1.0 };
            for i in 0..n {
                want[i] += sign * (d[i] / r) / r.powi(n as i32 - 1);
            }
        }
        let got = resultant_force(
            &x,
            neighbors.iter().map(|c| (c.state.coords(), c.polarity)),
            &model,
        )
        .force;
        let scale = magnitude_scale(&State::new(x.clone()), &neighbors, &model);
        assert!(max_abs_diff(got.components(), &want) <= 1e-12 * scale);
    }
}

/// The planner's Coulomb field is the negative gradient of the n-dimensional
/// Coulomb potential.
#[test]
fn coulomb_field_is_a_gradient() {
    let potential = |r: f64, n: usize| {
        if n == 2 {
            -r.ln()
        } else {
            r.powi(2 - n as i32) / (n as f64 - 2.0)
        }
    };
    let model = ChargeModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2usize, 3, 4, 8] {
        for _ in 0..200 {
            let r = 0.2 + 2.0 * rng.random::<f64>();
            let h = 1e-6;
            let slope = (potential(r + h, n) - potential(r - h, n)) / (2.0 * h);
            let mut p = vec![0.0; n];
            p[0] = r;
            let f = pair_force(
                &State::splat(n, 0.0),
                &ChargedSample::invalid(State::new(p)),
                &model,
            )
            .unwrap();
            assert!((-f.components()[0] - slope.abs()).abs() <= 1e-6 * slope.abs());
        }
    }
}

#[test]
fn guidance_forces_follow_inverse_square_inside_cutoff() {
    let model = ChargeModel {
        rho0: 5.0,
        ..ChargeModel::default()
    };
    let origin = State::new(vec![0.0, 0.0]);
    let mags: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&r| {
            repulsive_force(&State::new(vec![r, 0.0]), &origin, &model)
                .unwrap()
                .norm()
        })
        .collect();
    let slope = (mags[2].ln() - mags[0].ln()) / (2f64.ln() - 0.5f64.ln());
    assert!((slope + 2.0).abs() <= 1e-9);
    let a = attractive_force(&State::new(vec![2.0, 0.0]), &origin, &model).unwrap();
    assert!((a.norm() - 0.25).abs() <= 1e-15);
}
