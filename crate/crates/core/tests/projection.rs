mod common;

use common::{brute_force_simplex, random_point_in, random_set};
use nalgebra::DVector;
use ohl_core::optim::{
    lazy_step, project_c, project_simplex, projected_gradient, regret_update, variation_m, FeasibleSet,
    GradAccumulator, Interval, RegretTrace,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 1000;
const SLACK: f64 = 1e-12;

#[test]
fn simplex_projection_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..60 {
        let m = 1 + k % 3;
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fast = project_simplex(&v);
        let slow = brute_force_simplex(&v);
        let gap = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-6, "v={v:?} fast={fast:?} slow={slow:?}");
    }
    assert!(brute_force_simplex(&[0.3, 0.2]).iter().zip([0.55, 0.45]).all(|(a, b)| (a - b).abs() <= 1e-6));
}

#[test]
fn projection_is_closest_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..DRAWS {
        let set = random_set(&mut rng);
        let v = DVector::from_fn(set.dim(), |_, _| rng.random_range(-4.0..4.0));
        let c = random_point_in(&mut rng, &set);
        let p = project_c(&v, &set);
        assert!(set.contains(&p));
        assert!((&v - &p).norm() <= (&v - &c).norm() + SLACK);
        assert!((&v - &p).dot(&(&c - &p)) <= SLACK);
        assert_eq!(project_c(&p, &set), p);
    }
}

#[test]
fn projected_gradient_is_nonexpansive_in_the_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..DRAWS {
        let set = random_set(&mut rng);
        let z = random_point_in(&mut rng, &set);
        let g1 = DVector::from_fn(set.dim(), |_, _| rng.random_range(-5.0..5.0));
        let g2 = DVector::from_fn(set.dim(), |_, _| rng.random_range(-5.0..5.0));
        let eta = rng.random_range(0.01..1.0);
        let p1 = projected_gradient(&z, &g1, eta, &set);
        let p2 = projected_gradient(&z, &g2, eta, &set);
        assert!((p1 - p2).norm() <= (&g1 - &g2).norm() + SLACK);
    }
}

#[test]
fn projected_gradient_correlates_with_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..DRAWS {
        let set = random_set(&mut rng);
        let z = random_point_in(&mut rng, &set);
        let g = DVector::from_fn(set.dim(), |_, _| rng.random_range(-5.0..5.0));
        let p = projected_gradient(&z, &g, rng.random_range(0.01..1.0), &set);
        assert!(g.dot(&p) >= p.norm_squared() - SLACK);
    }
}

#[test]
fn projected_gradient_vanishes_at_constrained_minimum() {
    // min of (x - 3)^2 over [0, 1] sits at the upper bound
    let set = FeasibleSet::new(2, 1..2, vec![Interval::new(0.0, 1.0)]).unwrap();
    let z = DVector::from_vec(vec![1.0, 1.0]);
    let g = DVector::from_vec(vec![2.0 * (1.0 - 3.0), 0.7]);
    assert_eq!(projected_gradient(&z, &g, 0.25, &set).norm(), 0.0);
}

#[test]
fn lazy_step_follows_its_definition() {
    let set = FeasibleSet::new(2, 1..2, vec![Interval::new(0.0, 1.0)]).unwrap();
    let z = DVector::from_vec(vec![0.5, 1.0]);
    let mut acc = GradAccumulator::new(2);
    for _ in 0..4 {
        acc.add(&DVector::from_vec(vec![2.0, 0.0]));
    }
    assert_eq!(lazy_step(&z, &acc, 0.5, 4, &set).unwrap()[0], 0.0);
    assert_eq!(lazy_step(&z, &acc, 0.0, 4, &set).unwrap(), z);
    assert!(lazy_step(&z, &acc, 0.5, 3, &set).is_err());
}

#[test]
fn regret_examples() {
    let set = FeasibleSet::new(3, 2..3, vec![Interval::new(-10.0, 10.0); 2]).unwrap();
    let z = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let mut trace = RegretTrace::new();
    for _ in 0..7 {
        trace = regret_update(trace, &z, &DVector::zeros(3), 0.01, &set);
    }
    assert_eq!(trace.total(), 0.0);
    // dyadic eta keeps z - eta g exact so P = g
    let r = 2.0_f64.sqrt();
    let g = DVector::from_vec(vec![r, r, 0.0]);
    let trace = regret_update(trace, &z, &g, 0.0078125, &set);
    assert!((trace.total() - 4.0).abs() <= 1e-12);
}

type Field<'a> = &'a dyn Fn(&DVector<f64>) -> DVector<f64>;

#[test]
fn variation_of_two_quadratics() {
    let f1 = |z: &DVector<f64>| z * 2.0;
    let f2 = |z: &DVector<f64>| (z.add_scalar(-1.0)) * 2.0;
    let grid = [DVector::from_element(1, 0.0)];
    let fields: [Field; 2] = [&f1, &f2];
    assert_eq!(variation_m(&fields, &grid), 2.0);
    assert_eq!(variation_m(&fields[..1], &grid), 0.0);
    assert_eq!(variation_m(&[&f1 as Field, &f1], &grid), 0.0);
}

proptest! {
    #[test]
    fn simplex_projection_lands_on_simplex(v in proptest::collection::vec(-1e3f64..1e3, 1..12)) {
        let b = project_simplex(&v);
        prop_assert!(b.iter().all(|x| *x >= 0.0));
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(project_simplex(&b), b);
    }

    #[test]
    fn simplex_projection_ignores_common_shift(v in proptest::collection::vec(-5f64..5.0, 1..8), s in -3f64..3.0) {
        let a = project_simplex(&v);
        let b = project_simplex(&v.iter().map(|x| x + s).collect::<Vec<_>>());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-9));
    }
}
