mod common;

use common::{central_diff, composite_eval, max_rel_err, random_instance, theta_by_lu};
use nalgebra::{DMatrix, DVector};
use ohl_core::kernels::{cross_vector, gram, gram_derivative};
use ohl_core::model::{fit, loss};
use ohl_core::{BaseKernel, CompositeSpec, HyperParams, Sample, TimedPoint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 120;

#[test]
fn gram_derivative_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < DRAWS {
        let inst = random_instance(&mut rng, 12);
        let spec = &inst.hypers.kernel;
        let params = DVector::from_vec(spec.params());
        let fd = central_diff(&params, |l| {
            let mut s = spec.clone();
            s.set_params(l.as_slice()).unwrap();
            DVector::from_column_slice(gram(&s, &inst.window).unwrap().entries().as_slice())
        });
        for i in 0..spec.dim() {
            let d = gram_derivative(spec, &inst.window, i).unwrap();
            let col = fd.column(i);
            let err = (DVector::from_column_slice(d.as_slice()) - col).amax() / col.amax().max(1e-8);
            worst = worst.max(err);
            assert!((&d - d.transpose()).amax() == 0.0, "derivative must be symmetric");
        }
        checked += 1;
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn ridge_has_no_gram_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inst = random_instance(&mut rng, 5);
    let kdim = inst.hypers.kernel.dim();
    assert!(gram_derivative(&inst.hypers.kernel, &inst.window, kdim).is_err());
}

#[test]
fn theta_matches_independent_solver_and_residual_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..DRAWS {
        let inst = random_instance(&mut rng, 50);
        let model = fit(&inst.hypers, &inst.window).unwrap();
        let oracle = theta_by_lu(&inst.hypers, &inst.window);
        assert!((model.theta() - &oracle).amax() <= 1e-9 * oracle.amax().max(1.0));
        let y = model.targets();
        let residual = (model.system_matrix() * model.theta() - &y).norm();
        assert!(residual <= 1e-8 * y.norm(), "residual {residual:e}");
        assert!(model.theta().norm() <= y.norm() / inst.hypers.ridge * (1.0 + 1e-12));
    }
}

#[test]
fn theta_jacobian_matches_refit_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..DRAWS {
        let inst = random_instance(&mut rng, 50);
        let lambda = inst.hypers.to_vector();
        let jac = fit(&inst.hypers, &inst.window).unwrap().theta_jacobian();
        let fd =
            central_diff(&lambda, |l| fit(&inst.hypers.with_vector(l).unwrap(), &inst.window).unwrap().theta().clone());
        for c in 0..fd.ncols() {
            let b = fd.column(c);
            worst = worst.max((jac.columns().column(c) - b).amax() / b.amax().max(1e-8));
        }
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn loss_gradient_matches_refit_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..DRAWS {
        let inst = random_instance(&mut rng, 50);
        let lambda = inst.hypers.to_vector();
        let model = fit(&inst.hypers, &inst.window).unwrap();
        let g = model.loss_hyper_gradient(&model.theta_jacobian(), &inst.query, inst.target).unwrap();
        let fd = central_diff(&lambda, |l| {
            let m = fit(&inst.hypers.with_vector(l).unwrap(), &inst.window).unwrap();
            DVector::from_element(1, loss(inst.target, m.predict(&inst.query).unwrap()))
        });
        worst = worst.max(max_rel_err(g.as_slice(), fd.as_slice(), 1e-8));
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn zero_residual_gives_exactly_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 20);
        let model = fit(&inst.hypers, &inst.window).unwrap();
        let y = model.predict(&inst.query).unwrap();
        let g = model.loss_hyper_gradient(&model.theta_jacobian(), &inst.query, y).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn cached_jacobian_gives_same_gradient_as_fresh() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inst = random_instance(&mut rng, 30);
    let model = fit(&inst.hypers, &inst.window).unwrap();
    let cached = model.theta_jacobian();
    let p = inst.query.lags();
    for q in 0..10 {
        let query = TimedPoint::new(100 + q, vec![0.1 * q as f64; p]);
        let a = model.loss_hyper_gradient(&cached, &query, 0.5).unwrap();
        let b = model.loss_hyper_gradient(&model.theta_jacobian(), &query, 0.5).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn training_error_shrinks_as_ridge_decreases() {
    let window: Vec<Sample> = (0..12)
        .map(|i| Sample {
            point: TimedPoint::new(i, vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()]),
            y: (i as f64).sqrt(),
        })
        .collect();
    let spec = CompositeSpec::single(BaseKernel::se(2.0)).unwrap();
    assert!(gram(&spec, &window).unwrap().min_eigenvalue() > 1e-6);
    let errors: Vec<f64> = [1.0, 0.1, 0.03]
        .iter()
        .map(|r| {
            let m = fit(&HyperParams::new(spec.clone(), *r).unwrap(), &window).unwrap();
            window.iter().map(|s| loss(s.y, m.predict(&s.point).unwrap())).sum::<f64>()
        })
        .collect();
    assert!(errors[0] >= errors[1] && errors[1] >= errors[2], "{errors:?}");
}

#[test]
fn cross_vector_is_gram_row_on_extended_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 5);
        let points: Vec<TimedPoint> = inst.window.iter().map(|s| s.point.clone()).collect();
        let mut extended = points.clone();
        extended.push(inst.query.clone());
        let g = gram(&inst.hypers.kernel, &extended).unwrap();
        let k = cross_vector(&inst.hypers.kernel, &inst.query, &points).unwrap();
        let n = points.len();
        for j in 0..n {
            assert!((k[j] - g.entries()[(n, j)]).abs() <= 1e-15);
        }
    }
}

#[test]
fn periodic_component_recurs_after_one_period() {
    let spec = CompositeSpec::new(vec![BaseKernel::periodic(3.0, 7.0), BaseKernel::se(1.0)], vec![1.0, 0.0]).unwrap();
    let window: Vec<TimedPoint> = (0..6).map(|t| TimedPoint::new(t, vec![t as f64])).collect();
    for w in &window {
        let k = cross_vector(&spec, &TimedPoint::new(w.t + 7, vec![-4.0]), std::slice::from_ref(w)).unwrap();
        assert!((k[0] - 1.0).abs() <= 1e-15, "{}", k[0]);
    }
}

fn arb_spec(p: usize) -> impl Strategy<Value = CompositeSpec> {
    let kernel = prop_oneof![
        (0.01f64..5.0, 1.0f64..30.0).prop_map(|(nu, w)| BaseKernel::periodic(nu, w)),
        (0.0f64..3.0).prop_map(BaseKernel::se),
        proptest::collection::vec(0.0f64..3.0, p).prop_map(BaseKernel::ard),
    ];
    proptest::collection::vec((kernel, 0.01f64..1.0), 1..=3).prop_map(|parts| {
        let total: f64 = parts.iter().map(|(_, b)| b).sum();
        let (ks, bs): (Vec<_>, Vec<_>) = parts.into_iter().map(|(k, b)| (k, b / total)).unzip();
        CompositeSpec::new(ks, bs).unwrap()
    })
}

fn arb_window(p: usize, max: usize) -> impl Strategy<Value = Vec<TimedPoint>> {
    proptest::collection::vec((0i64..200, proptest::collection::vec(-3.0f64..3.0, p)), 1..=max)
        .prop_map(|pts| pts.into_iter().map(|(t, x)| TimedPoint::new(t, x)).collect())
}

fn spec_and_window(max: usize) -> impl Strategy<Value = (CompositeSpec, Vec<TimedPoint>)> {
    (1usize..6).prop_flat_map(move |p| (arb_spec(p), arb_window(p, max)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gram_is_symmetric_bounded_and_psd((spec, window) in spec_and_window(32)) {
        let g = gram(&spec, &window).unwrap();
        let n = window.len() as f64;
        prop_assert_eq!(g.max_asymmetry(), 0.0);
        prop_assert!(g.entries().iter().all(|v| *v > 0.0 && *v <= 1.0 + 1e-15));
        prop_assert!(g.min_eigenvalue() >= -1e-8 * g.entries().trace() / n);
        prop_assert!(g.satisfies_invariants());
    }

    #[test]
    fn kernel_values_are_symmetric((spec, window) in spec_and_window(4)) {
        for a in &window {
            for b in &window {
                let ab = cross_vector(&spec, a, std::slice::from_ref(b)).unwrap()[0];
                let ba = cross_vector(&spec, b, std::slice::from_ref(a)).unwrap()[0];
                prop_assert_eq!(ab, ba);
                prop_assert!((ab - composite_eval(&spec, a, b)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn mixture_is_linear_in_weights((spec, window) in spec_and_window(10)) {
        let whole = gram(&spec, &window).unwrap().into_entries();
        let n = window.len();
        let mut sum = DMatrix::zeros(n, n);
        for (k, b) in spec.components().iter().zip(spec.beta()) {
            let single = CompositeSpec::single(k.clone()).unwrap();
            sum += gram(&single, &window).unwrap().into_entries() * *b;
        }
        prop_assert!((whole - sum).amax() <= 1e-12);
    }

    #[test]
    fn weight_derivative_is_component_gram((spec, window) in spec_and_window(8)) {
        let offset = spec.beta_offset();
        for (m, k) in spec.components().iter().enumerate() {
            let d = gram_derivative(&spec, &window, offset + m).unwrap();
            let single = gram(&CompositeSpec::single(k.clone()).unwrap(), &window).unwrap().into_entries();
            prop_assert!((d - single).amax() <= 1e-15);
        }
    }
}
