//! Base kernels, their convex combination and analytic derivatives.
//!
//! The periodic kernel acts on the integer time index of a point, the
//! squared-exponential and ARD kernels act on its lag vector. Every scale
//! `nu` is an inverse length scale.
//!
//! Kernel hyperparameters are flattened in a fixed order: the scalars of each
//! component in declaration order (periodic: `nu`, `omega`; SE: `nu`; ARD:
//! `nu[0..p]`), followed by the mixture weights `beta[0..M]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance on `sum(beta) == 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A time-stamped lag vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedPoint {
    /// Integer time index in steps.
    pub t: i64,
    /// Lagged observations, oldest first.
    pub x: Vec<f64>,
}

impl TimedPoint {
    pub fn new(t: i64, x: Vec<f64>) -> Self {
        Self { t, x }
    }

    pub fn lags(&self) -> usize {
        self.x.len()
    }
}

impl AsRef<TimedPoint> for TimedPoint {
    fn as_ref(&self) -> &TimedPoint {
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicParams {
    pub nu: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeParams {
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArdParams {
    pub nu: Vec<f64>,
}

/// `exp(-nu * sin^2(pi * dt / omega))`.
pub fn eval_periodic(dt: f64, params: &PeriodicParams) -> f64 {
    let s = (PI * dt.abs() / params.omega).sin();
    (-params.nu * s * s).exp()
}

/// `exp(-nu * |x - x2|^2)`.
pub fn eval_se(x: &[f64], x2: &[f64], params: &SeParams) -> Result<f64> {
    check_len(x.len(), x2.len())?;
    Ok((-params.nu * sq_dist(x, x2)).exp())
}

/// `exp(-sum_i nu_i * (x_i - x2_i)^2)`.
pub fn eval_ard(x: &[f64], x2: &[f64], params: &ArdParams) -> Result<f64> {
    check_len(x.len(), x2.len())?;
    check_len(params.nu.len(), x.len())?;
    let s: f64 = params.nu.iter().zip(x.iter().zip(x2)).map(|(nu, (a, b))| nu * ((a - b) * (a - b))).sum();
    Ok((-s).exp())
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// One of the three kernel families.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseKernel {
    Periodic(PeriodicParams),
    Se(SeParams),
    Ard(ArdParams),
}

impl BaseKernel {
    pub fn periodic(nu: f64, omega: f64) -> Self {
        BaseKernel::Periodic(PeriodicParams { nu, omega })
    }

    pub fn se(nu: f64) -> Self {
        BaseKernel::Se(SeParams { nu })
    }

    pub fn ard(nu: Vec<f64>) -> Self {
        BaseKernel::Ard(ArdParams { nu })
    }

    pub fn family(&self) -> &'static str {
        match self {
            BaseKernel::Periodic(_) => "periodic",
            BaseKernel::Se(_) => "se",
            BaseKernel::Ard(_) => "ard",
        }
    }

    /// Number of scalar hyperparameters owned by this kernel.
    pub fn n_params(&self) -> usize {
        match self {
            BaseKernel::Periodic(_) => 2,
            BaseKernel::Se(_) => 1,
            BaseKernel::Ard(p) => p.nu.len(),
        }
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            BaseKernel::Periodic(p) => out.extend([p.nu, p.omega]),
            BaseKernel::Se(p) => out.push(p.nu),
            BaseKernel::Ard(p) => out.extend_from_slice(&p.nu),
        }
    }

    fn read_params(&mut self, values: &[f64]) {
        match self {
            BaseKernel::Periodic(p) => {
                p.nu = values[0];
                p.omega = values[1];
            }
            BaseKernel::Se(p) => p.nu = values[0],
            BaseKernel::Ard(p) => p.nu.copy_from_slice(values),
        }
    }

    fn param_names(&self, prefix: &str, out: &mut Vec<String>) {
        match self {
            BaseKernel::Periodic(_) => {
                out.push(format!("{prefix}.nu"));
                out.push(format!("{prefix}.omega"));
            }
            BaseKernel::Se(_) => out.push(format!("{prefix}.nu")),
            BaseKernel::Ard(p) => {
                out.extend((0..p.nu.len()).map(|i| format!("{prefix}.nu{i}")));
            }
        }
    }

    /// Marks which of this kernel's scalars are scales (`nu`) rather than periods.
    fn scale_mask(&self, out: &mut Vec<bool>) {
        match self {
            BaseKernel::Periodic(_) => out.extend([true, false]),
            BaseKernel::Se(_) => out.push(true),
            BaseKernel::Ard(p) => out.extend(std::iter::repeat_n(true, p.nu.len())),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        match self {
            BaseKernel::Periodic(p) => {
                if !(p.nu > 0.0 && p.nu.is_finite()) {
                    return bad("periodic nu must be positive");
                }
                if !(p.omega > 0.0 && p.omega.is_finite()) {
                    return bad("periodic omega must be positive");
                }
            }
            BaseKernel::Se(p) => {
                if !(p.nu >= 0.0 && p.nu.is_finite()) {
                    return bad("se nu must be nonnegative");
                }
            }
            BaseKernel::Ard(p) => {
                if p.nu.is_empty() {
                    return bad("ard needs at least one scale");
                }
                if p.nu.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return bad("ard scales must be nonnegative");
                }
            }
        }
        Ok(())
    }

    fn check_point(&self, p: &TimedPoint) -> Result<()> {
        if let BaseKernel::Ard(a) = self {
            check_len(a.nu.len(), p.x.len())?;
        }
        Ok(())
    }

    pub fn eval(&self, a: &TimedPoint, b: &TimedPoint) -> f64 {
        match self {
            BaseKernel::Periodic(p) => eval_periodic((a.t - b.t) as f64, p),
            BaseKernel::Se(p) => (-p.nu * sq_dist(&a.x, &b.x)).exp(),
            BaseKernel::Ard(p) => {
                let s: f64 = p.nu.iter().zip(a.x.iter().zip(&b.x)).map(|(nu, (u, v))| nu * ((u - v) * (u - v))).sum();
                (-s).exp()
            }
        }
    }

    /// Evaluates the kernel and writes its partial derivatives into `grad`.
    fn eval_with_grad(&self, a: &TimedPoint, b: &TimedPoint, grad: &mut [f64]) -> f64 {
        match self {
            BaseKernel::Periodic(p) => {
                let dt = (a.t - b.t).abs() as f64;
                let arg = PI * dt / p.omega;
                let s = arg.sin();
                let k = (-p.nu * s * s).exp();
                grad[0] = -s * s * k;
                // d/domega of -nu sin^2(pi dt/omega) = nu sin(2 pi dt/omega) pi dt / omega^2
                grad[1] = k * p.nu * (2.0 * arg).sin() * PI * dt / (p.omega * p.omega);
                k
            }
            BaseKernel::Se(p) => {
                let d2 = sq_dist(&a.x, &b.x);
                let k = (-p.nu * d2).exp();
                grad[0] = -d2 * k;
                k
            }
            BaseKernel::Ard(p) => {
                let mut s = 0.0;
                for (i, (u, v)) in a.x.iter().zip(&b.x).enumerate() {
                    let d2 = (u - v) * (u - v);
                    grad[i] = d2;
                    s += p.nu[i] * d2;
                }
                let k = (-s).exp();
                for g in grad.iter_mut() {
                    *g *= -k;
                }
                k
            }
        }
    }
}

/// Convex combination `sum_m beta_m K^(m)` of base kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeSpec {
    components: Vec<BaseKernel>,
    beta: Vec<f64>,
}

impl CompositeSpec {
    pub fn new(components: Vec<BaseKernel>, beta: Vec<f64>) -> Result<Self> {
        let spec = Self { components, beta };
        spec.validate()?;
        Ok(spec)
    }

    /// A single kernel with weight one.
    pub fn single(kernel: BaseKernel) -> Result<Self> {
        Self::new(vec![kernel], vec![1.0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("composite kernel needs at least one component".into()));
        }
        check_len(self.components.len(), self.beta.len())?;
        for c in &self.components {
            c.validate()?;
        }
        if self.beta.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::InvalidParameter("mixture weights must be nonnegative".into()));
        }
        let sum: f64 = self.beta.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {sum}, expected 1")));
        }
        let ard_dims: Vec<usize> = self
            .components
            .iter()
            .filter_map(|c| match c {
                BaseKernel::Ard(a) => Some(a.nu.len()),
                _ => None,
            })
            .collect();
        if ard_dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidParameter("ARD components disagree on lag order".into()));
        }
        Ok(())
    }

    pub fn components(&self) -> &[BaseKernel] {
        &self.components
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Number of flattened kernel hyperparameters (component scalars plus weights).
    pub fn dim(&self) -> usize {
        self.components.iter().map(BaseKernel::n_params).sum::<usize>() + self.beta.len()
    }

    /// Offset of `beta[0]` in the flattened vector.
    pub fn beta_offset(&self) -> usize {
        self.dim() - self.beta.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for c in &self.components {
            c.write_params(&mut out);
        }
        out.extend_from_slice(&self.beta);
        out
    }

    /// Overwrites all kernel hyperparameters from a flattened vector.
    ///
    /// No validation is performed, so finite-difference probes may step
    /// slightly off the simplex.
    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        check_len(self.dim(), values.len())?;
        let mut off = 0;
        for c in &mut self.components {
            let n = c.n_params();
            c.read_params(&values[off..off + n]);
            off += n;
        }
        self.beta.copy_from_slice(&values[off..]);
        Ok(())
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim());
        for (m, c) in self.components.iter().enumerate() {
            c.param_names(&format!("k{m}.{}", c.family()), &mut out);
        }
        out.extend((0..self.beta.len()).map(|m| format!("beta{m}")));
        out
    }

    /// For each flattened kernel hyperparameter, whether it is a kernel scale.
    pub fn scale_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.dim());
        for c in &self.components {
            c.scale_mask(&mut out);
        }
        out.extend(std::iter::repeat_n(false, self.beta.len()));
        out
    }

    fn check_points<P: AsRef<TimedPoint>>(&self, points: &[P]) -> Result<()> {
        let Some(first) = points.first() else {
            return Err(Error::EmptyWindow);
        };
        let p = first.as_ref().lags();
        for pt in points {
            check_len(p, pt.as_ref().lags())?;
        }
        for c in &self.components {
            c.check_point(first.as_ref())?;
        }
        Ok(())
    }

    pub fn eval(&self, a: &TimedPoint, b: &TimedPoint) -> f64 {
        self.components.iter().zip(&self.beta).map(|(c, w)| w * c.eval(a, b)).sum()
    }

    /// Composite value plus its gradient over all flattened kernel hyperparameters.
    fn eval_with_grad(&self, a: &TimedPoint, b: &TimedPoint, grad: &mut [f64]) -> f64 {
        let beta_off = self.beta_offset();
        let mut off = 0;
        let mut value = 0.0;
        for (m, (c, w)) in self.components.iter().zip(&self.beta).enumerate() {
            let n = c.n_params();
            let g = &mut grad[off..off + n];
            let k = c.eval_with_grad(a, b, g);
            for v in g.iter_mut() {
                *v *= w;
            }
            grad[beta_off + m] = k;
            value += w * k;
            off += n;
        }
        value
    }
}

/// Symmetric positive semi-definite kernel matrix over a training window.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    source: String,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// Describes the kernel families and window the matrix was built from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Symmetry within 1e-12 and min eigenvalue at least `-1e-8 * trace / N`.
    pub fn satisfies_invariants(&self) -> bool {
        let n = self.size() as f64;
        self.max_asymmetry() <= 1e-12 && self.min_eigenvalue() >= -1e-8 * self.entries.trace() / n
    }
}

/// Composite Gram matrix over a window; the upper triangle is computed and mirrored.
pub fn gram<P: AsRef<TimedPoint>>(spec: &CompositeSpec, window: &[P]) -> Result<GramMatrix> {
    spec.check_points(window)?;
    let n = window.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let a = window[i].as_ref();
        for j in i..n {
            let v = spec.eval(a, window[j].as_ref());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let families: Vec<&str> = spec.components.iter().map(BaseKernel::family).collect();
    let source = format!("{}/N={}/t={}..{}", families.join("+"), n, window[0].as_ref().t, window[n - 1].as_ref().t);
    Ok(GramMatrix { entries: k, source })
}

/// Composite kernel between `query` and every window point.
pub fn cross_vector<P: AsRef<TimedPoint>>(
    spec: &CompositeSpec,
    query: &TimedPoint,
    window: &[P],
) -> Result<DVector<f64>> {
    spec.check_points(window)?;
    check_len(window[0].as_ref().lags(), query.lags())?;
    Ok(DVector::from_iterator(window.len(), window.iter().map(|w| spec.eval(query, w.as_ref()))))
}

/// Entrywise derivative of the composite Gram matrix with respect to one
/// flattened kernel hyperparameter.
pub fn gram_derivative<P: AsRef<TimedPoint>>(spec: &CompositeSpec, window: &[P], which: usize) -> Result<DMatrix<f64>> {
    let dim = spec.dim();
    if which >= dim {
        return Err(Error::NotAKernelHyperparameter { index: which, kernel_dim: dim });
    }
    spec.check_points(window)?;
    let n = window.len();
    let mut out = DMatrix::zeros(n, n);
    let mut grad = vec![0.0; dim];
    for i in 0..n {
        for j in i..n {
            spec.eval_with_grad(window[i].as_ref(), window[j].as_ref(), &mut grad);
            out[(i, j)] = grad[which];
            out[(j, i)] = grad[which];
        }
    }
    Ok(out)
}

/// Products `(dK/dlambda_k) * v` for every kernel hyperparameter `k`, as the
/// columns of an `N x dim` matrix. No derivative matrix is materialised.
pub fn gram_derivative_times<P: AsRef<TimedPoint>>(
    spec: &CompositeSpec,
    window: &[P],
    v: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    spec.check_points(window)?;
    let n = window.len();
    check_len(n, v.len())?;
    let dim = spec.dim();
    let mut out = DMatrix::zeros(n, dim);
    let mut grad = vec![0.0; dim];
    for i in 0..n {
        let a = window[i].as_ref();
        for j in i..n {
            spec.eval_with_grad(a, window[j].as_ref(), &mut grad);
            for (k, g) in grad.iter().enumerate() {
                out[(i, k)] += g * v[j];
                if j != i {
                    out[(j, k)] += g * v[i];
                }
            }
        }
    }
    Ok(out)
}

/// Derivative of the cross vector: row `j` holds `d k(query, window_j) / d lambda`.
pub fn cross_vector_jacobian<P: AsRef<TimedPoint>>(
    spec: &CompositeSpec,
    query: &TimedPoint,
    window: &[P],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    spec.check_points(window)?;
    check_len(window[0].as_ref().lags(), query.lags())?;
    let n = window.len();
    let dim = spec.dim();
    let mut values = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, dim);
    let mut grad = vec![0.0; dim];
    for (j, w) in window.iter().enumerate() {
        values[j] = spec.eval_with_grad(query, w.as_ref(), &mut grad);
        for (k, g) in grad.iter().enumerate() {
            jac[(j, k)] = *g;
        }
    }
    Ok((values, jac))
}
