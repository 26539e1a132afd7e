//! Multiple-kernel ridge regression for rolling time-series prediction.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: periodic, squared-exponential and ARD kernels, their convex
//!   combination, Gram matrices and analytic hyperparameter derivatives.
//! - [`model`]: closed-form dual fit, prediction, the per-step squared loss and
//!   its exact gradient with respect to every hyperparameter.
//! - [`optim`]: box × simplex projections, the projected gradient, lazy
//!   windowed updates and local-regret bookkeeping.
//! - [`tuners`]: the online learner and the rolling baselines (grid, random,
//!   offline gradient, fixed) with fit-count instrumentation.
//! - [`data`]: synthetic streams, CSV ingestion, binning and lag features.
//! - [`report`]: running RMSE and cross-strategy summaries.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod kernels;
pub mod model;
pub mod optim;
pub mod report;
pub mod tuners;

pub use data::{Dataset, Sample, SyntheticConfig, TimeSeries};
pub use error::{Error, Result};
pub use kernels::{ArdParams, BaseKernel, CompositeSpec, GramMatrix, PeriodicParams, SeParams, TimedPoint};
pub use model::{HyperJacobian, HyperParams, TrainedModel};
pub use optim::{FeasibleSet, GradAccumulator, Interval, RegretTrace, Scale};
pub use report::Report;
pub use tuners::{PhaseCounts, RunTrace, Schedule, Strategy, TunerConfig};
