//! Dual kernel ridge regression and its exact hyper-gradients.
//!
//! The fitted coefficients are `theta = (K + ridge*I)^{-1} y`. Differentiating
//! `A theta = y` gives `d theta / d lambda_i = -A^{-1} (dA/d lambda_i) theta`,
//! where `dA/d lambda_i` is the Gram derivative for kernel hyperparameters and
//! the identity for the ridge constant. All columns share one Cholesky factor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::kernels::{self, CompositeSpec, TimedPoint};

/// The full hyperparameter vector: kernel hyperparameters followed by the ridge constant.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    pub kernel: CompositeSpec,
    pub ridge: f64,
}

impl HyperParams {
    pub fn new(kernel: CompositeSpec, ridge: f64) -> Result<Self> {
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidParameter(format!("ridge must be positive, got {ridge}")));
        }
        Ok(Self { kernel, ridge })
    }

    /// Total scalar dimension `d`.
    pub fn dim(&self) -> usize {
        self.kernel.dim() + 1
    }

    pub fn ridge_index(&self) -> usize {
        self.kernel.dim()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = self.kernel.params();
        v.push(self.ridge);
        DVector::from_vec(v)
    }

    /// Same kernel structure with every scalar replaced from `v`.
    ///
    /// Mixture weights are not renormalised; callers that need a point of the
    /// feasible set project first.
    pub fn with_vector(&self, v: &DVector<f64>) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        let mut kernel = self.kernel.clone();
        kernel.set_params(&v.as_slice()[..self.kernel.dim()])?;
        Ok(Self { kernel, ridge: v[self.kernel.dim()] })
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = self.kernel.param_names();
        names.push("ridge".to_string());
        names
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        Self::new(self.kernel.clone(), self.ridge).map(|_| ())
    }
}

/// A fitted model with its cached factorization of `K + ridge*I`.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    theta: DVector<f64>,
    solver: Cholesky<f64, Dyn>,
    window: Vec<Sample>,
    hypers: HyperParams,
}

/// Squared loss `(y_true - y_pred)^2`.
pub fn loss(y_true: f64, y_pred: f64) -> f64 {
    let r = y_true - y_pred;
    r * r
}

/// Solves `(K + ridge*I) theta = y` on the window.
pub fn fit(hypers: &HyperParams, window: &[Sample]) -> Result<TrainedModel> {
    let mut a = kernels::gram(&hypers.kernel, window)?.into_entries();
    for i in 0..window.len() {
        a[(i, i)] += hypers.ridge;
    }
    let solver = Cholesky::new(a).ok_or(Error::Factorization { ridge: hypers.ridge })?;
    let y = DVector::from_iterator(window.len(), window.iter().map(|s| s.y));
    let theta = solver.solve(&y);
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization { ridge: hypers.ridge });
    }
    Ok(TrainedModel { theta, solver, window: window.to_vec(), hypers: hypers.clone() })
}

impl TrainedModel {
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn window(&self) -> &[Sample] {
        &self.window
    }

    pub fn hypers(&self) -> &HyperParams {
        &self.hypers
    }

    pub fn targets(&self) -> DVector<f64> {
        DVector::from_iterator(self.window.len(), self.window.iter().map(|s| s.y))
    }

    /// `A = K + ridge*I`, rebuilt from the factor.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        let l = self.solver.l();
        &l * l.transpose()
    }

    /// Solves `A x = b` with the cached factor.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solver.solve(b)
    }

    pub fn cross_vector(&self, query: &TimedPoint) -> Result<DVector<f64>> {
        kernels::cross_vector(&self.hypers.kernel, query, &self.window)
    }

    /// `k(query)^T theta`.
    pub fn predict(&self, query: &TimedPoint) -> Result<f64> {
        Ok(self.cross_vector(query)?.dot(&self.theta))
    }

    /// Columns `d theta / d lambda_i` for every hyperparameter, ridge last.
    pub fn theta_jacobian(&self) -> HyperJacobian {
        let n = self.window.len();
        let kdim = self.hypers.kernel.dim();
        let dk_theta = kernels::gram_derivative_times(&self.hypers.kernel, &self.window, &self.theta)
            .expect("window validated at fit time");
        let mut rhs = DMatrix::zeros(n, kdim + 1);
        rhs.columns_mut(0, kdim).copy_from(&dk_theta);
        rhs.set_column(kdim, &self.theta);
        rhs.neg_mut();
        self.solver.solve_mut(&mut rhs);
        HyperJacobian { columns: rhs }
    }

    /// Prediction at `query` together with the gradient of the squared loss
    /// against `y_true` with respect to every hyperparameter.
    pub fn predict_with_gradient(
        &self,
        jac: &HyperJacobian,
        query: &TimedPoint,
        y_true: f64,
    ) -> Result<(f64, DVector<f64>)> {
        let d = self.hypers.dim();
        if jac.columns.ncols() != d || jac.columns.nrows() != self.window.len() {
            return Err(Error::DimensionMismatch { expected: d, found: jac.columns.ncols() });
        }
        let k = self.cross_vector(query)?;
        let y_hat = k.dot(&self.theta);
        let residual = y_true - y_hat;
        let (_, dk) = kernels::cross_vector_jacobian(&self.hypers.kernel, query, &self.window)?;
        // one length-N inner product per hyperparameter against the cached Jacobian
        let through_theta = jac.columns.tr_mul(&k);
        let through_kernel = dk.tr_mul(&self.theta);
        let kdim = self.hypers.kernel.dim();
        let mut grad = DVector::zeros(d);
        for i in 0..d {
            let direct = if i < kdim { through_kernel[i] } else { 0.0 };
            grad[i] = -2.0 * residual * (direct + through_theta[i]);
        }
        Ok((y_hat, grad))
    }

    pub fn loss_hyper_gradient(&self, jac: &HyperJacobian, query: &TimedPoint, y_true: f64) -> Result<DVector<f64>> {
        self.predict_with_gradient(jac, query, y_true).map(|(_, g)| g)
    }
}

/// `N x d` matrix whose column `i` is `d theta* / d lambda_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperJacobian {
    columns: DMatrix<f64>,
}

impl HyperJacobian {
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.columns.column(i).into_owned()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }
}
