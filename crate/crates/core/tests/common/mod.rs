//! Instance generators and independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ohl_core::optim::project_c;
use ohl_core::{BaseKernel, CompositeSpec, FeasibleSet, HyperParams, Interval, Sample, TimedPoint};
use rand::Rng;

/// A random regression problem: a window, a query with its target, and hyperparameters.
pub struct Instance {
    pub hypers: HyperParams,
    pub window: Vec<Sample>,
    pub query: TimedPoint,
    pub target: f64,
}

fn random_kernel<R: Rng>(rng: &mut R, p: usize) -> BaseKernel {
    let scale = 1.0 / p as f64;
    match rng.random_range(0..3) {
        0 => BaseKernel::periodic(rng.random_range(0.1..2.0), rng.random_range(2.5..20.0)),
        1 => BaseKernel::se(rng.random_range(0.05..2.0) * scale),
        _ => BaseKernel::ard((0..p).map(|_| rng.random_range(0.05..2.0) * scale).collect()),
    }
}

/// Random instance with `N <= max_n`, `M <= 3`, `p <= 20`.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize) -> Instance {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(1..=20);
    let m = rng.random_range(1..=3);
    let components: Vec<BaseKernel> = (0..m).map(|_| random_kernel(rng, p)).collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let beta = raw.iter().map(|b| b / total).collect();
    let kernel = CompositeSpec::new(components, beta).unwrap();
    let hypers = HyperParams::new(kernel, rng.random_range(0.1..2.0)).unwrap();
    let point = |rng: &mut R, t: i64| TimedPoint::new(t, (0..p).map(|_| rng.random_range(-1.0..1.0)).collect());
    let window = (0..n as i64).map(|t| Sample { point: point(rng, t), y: rng.random_range(-2.0..2.0) }).collect();
    let lead = rng.random_range(0..5);
    let query = point(rng, n as i64 + lead);
    Instance { hypers, window, query, target: rng.random_range(-2.0..2.0) }
}

/// Central difference step for coordinate value `v`.
pub fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Central differences of a vector-valued function of the hyperparameter vector.
pub fn central_diff<F>(lambda: &DVector<f64>, f: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let cols: Vec<DVector<f64>> = (0..lambda.len())
        .map(|i| {
            let h = fd_step(lambda[i]);
            let mut plus = lambda.clone();
            let mut minus = lambda.clone();
            plus[i] += h;
            minus[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Dense oracle for `theta = (K + ridge I)^{-1} y` by LU, independent of the cached factor.
pub fn theta_by_lu(hypers: &HyperParams, window: &[Sample]) -> DVector<f64> {
    let n = window.len();
    let k = DMatrix::from_fn(n, n, |i, j| composite_eval(&hypers.kernel, &window[i].point, &window[j].point));
    let a = k + DMatrix::identity(n, n) * hypers.ridge;
    let y = DVector::from_iterator(n, window.iter().map(|s| s.y));
    a.lu().solve(&y).expect("oracle system is nonsingular")
}

/// Direct transcription of the composite kernel formula.
pub fn composite_eval(spec: &CompositeSpec, a: &TimedPoint, b: &TimedPoint) -> f64 {
    spec.components()
        .iter()
        .zip(spec.beta())
        .map(|(k, w)| {
            let v = match k {
                BaseKernel::Periodic(p) => {
                    let s = (std::f64::consts::PI * (a.t - b.t) as f64 / p.omega).sin();
                    (-p.nu * s * s).exp()
                }
                BaseKernel::Se(p) => {
                    let d: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v).powi(2)).sum();
                    (-p.nu * d).exp()
                }
                BaseKernel::Ard(p) => {
                    let d: f64 = p.nu.iter().zip(a.x.iter().zip(&b.x)).map(|(n, (u, v))| n * (u - v).powi(2)).sum();
                    (-d).exp()
                }
            };
            w * v
        })
        .sum()
}

/// `|a - b| / max(|b|, floor)` maximised over entries.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(floor)).fold(0.0, f64::max)
}

/// Validation RMSE of `hypers` fitted on `train`, computed without the library's solver or kernels.
pub fn backtest_rmse(hypers: &HyperParams, train: &[Sample], validation: &[Sample]) -> f64 {
    let theta = theta_by_lu(hypers, train);
    let sse: f64 = validation
        .iter()
        .map(|v| {
            let y_hat: f64 = train
                .iter()
                .zip(theta.iter())
                .map(|(s, th)| th * composite_eval(&hypers.kernel, &v.point, &s.point))
                .sum();
            (v.y - y_hat).powi(2)
        })
        .sum();
    (sse / validation.len() as f64).sqrt()
}

/// Minimises `|b - v|^2` over the simplex by exhaustive search on a 1e-3
/// grid, then repeatedly on a 10x finer grid around the incumbent.
pub fn brute_force_simplex(v: &[f64]) -> Vec<f64> {
    let cost = |b: &[f64]| b.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    match v.len() {
        1 => vec![1.0],
        2 => {
            let mut best = 0.0;
            let (mut lo, mut hi, mut step) = (0.0f64, 1.0f64, 1e-3);
            while step >= 1e-9 {
                let mut a = lo;
                while a <= hi + 1e-15 {
                    if cost(&[a, 1.0 - a]) < cost(&[best, 1.0 - best]) {
                        best = a;
                    }
                    a += step;
                }
                lo = (best - step).max(0.0);
                hi = (best + step).min(1.0);
                step /= 10.0;
            }
            vec![best, 1.0 - best]
        }
        3 => {
            let point = |a: f64, b: f64| [a, b, 1.0 - a - b];
            let mut best = (0.0, 0.0);
            let (mut a_lo, mut a_hi, mut b_lo, mut b_hi, mut step) = (0.0f64, 1.0f64, 0.0f64, 1.0f64, 1e-3);
            while step >= 1e-9 {
                let mut a = a_lo;
                while a <= a_hi + 1e-15 {
                    let mut b = b_lo;
                    while b <= b_hi + 1e-15 && a + b <= 1.0 + 1e-15 {
                        let b_ = b.min(1.0 - a);
                        if cost(&point(a, b_)) < cost(&point(best.0, best.1)) {
                            best = (a, b_);
                        }
                        b += step;
                    }
                    a += step;
                }
                a_lo = (best.0 - step).max(0.0);
                a_hi = (best.0 + step).min(1.0);
                b_lo = (best.1 - step).max(0.0);
                b_hi = (best.1 + step).min(1.0);
                step /= 10.0;
            }
            point(best.0, best.1).to_vec()
        }
        _ => unreachable!("oracle covers M <= 3"),
    }
}

/// Random box-times-simplex set with `d` coordinates and a simplex block of size 1..=3.
pub fn random_set<R: Rng>(rng: &mut R) -> FeasibleSet {
    let m = rng.random_range(1..=3);
    let boxes = rng.random_range(0..=4);
    let start = rng.random_range(0..=boxes);
    let intervals = (0..boxes)
        .map(|_| {
            let lo = rng.random_range(-2.0..1.0);
            Interval::new(lo, lo + rng.random_range(0.0..2.0))
        })
        .collect();
    FeasibleSet::new(boxes + m, start..start + m, intervals).unwrap()
}

pub fn random_point_in<R: Rng>(rng: &mut R, set: &FeasibleSet) -> DVector<f64> {
    let raw = DVector::from_fn(set.dim(), |_, _| rng.random_range(-3.0..3.0));
    let mut c = project_c(&raw, set);
    let block = set.simplex();
    let w: Vec<f64> = block.clone().map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = w.iter().sum::<f64>().max(1e-300);
    for (i, j) in block.enumerate() {
        c[j] = w[i] / total;
    }
    project_c(&c, set)
}
