//! Rolling prediction with pluggable hyperparameter strategies.
//!
//! Every strategy predicts the same evaluation steps of a [`Dataset`]: the
//! first `schedule.warmup(h)` samples are history only. Step `t` of a run
//! predicts sample `warmup + t`. The model is refit every `m` steps on the
//! `train_window` samples whose targets are already observed.
//!
//! - [`run_ohl`] updates hyperparameters online from accumulated
//!   hyper-gradients, one projected step per refit.
//! - [`run_rolling`] re-tunes every `n` steps by backtesting on the most recent
//!   `validation_window` samples (grid, random, offline gradient) or never
//!   (fixed).

use std::collections::VecDeque;
use std::fmt;
use std::ops::Range;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::model::{self, HyperParams};
use crate::optim::{self, FeasibleSet, GradAccumulator, RegretTrace, Scale};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Strategy {
    #[serde(rename = "OHL")]
    Ohl,
    #[serde(rename = "GRID")]
    Grid,
    #[serde(rename = "RANDOM")]
    Random,
    #[serde(rename = "OFFLINE_GRAD")]
    OfflineGrad,
    #[serde(rename = "FIXED")]
    Fixed,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ohl => "OHL",
            Strategy::Grid => "GRID",
            Strategy::Random => "RANDOM",
            Strategy::OfflineGrad => "OFFLINE_GRAD",
            Strategy::Fixed => "FIXED",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "OHL" => Ok(Strategy::Ohl),
            "GRID" => Ok(Strategy::Grid),
            "RANDOM" | "RDS" => Ok(Strategy::Random),
            "OFFLINE_GRAD" | "HOAG" => Ok(Strategy::OfflineGrad),
            "FIXED" => Ok(Strategy::Fixed),
            other => Err(Error::InvalidParameter(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Tuning interval `n`, refit interval `m` and window sizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub n: usize,
    pub m: usize,
    pub train_window: usize,
    pub validation_window: usize,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < self.m {
            return Err(Error::InvalidParameter(format!("schedule needs n >= m >= 1, got n={} m={}", self.n, self.m)));
        }
        if self.train_window < 1 {
            return Err(Error::InvalidParameter("train_window must be at least 1".into()));
        }
        Ok(())
    }

    /// Samples reserved as history before the first prediction, for horizon `h`.
    pub fn warmup(&self, horizon: usize) -> usize {
        self.train_window + self.validation_window + 2 * (horizon - 1)
    }
}

/// Per-hyperparameter value lists; the grid is their Cartesian product, with
/// unlisted coordinates taken from the initial configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<(usize, Vec<f64>)>,
}

impl GridSpec {
    pub fn expand(&self, init: &HyperParams, feasible: &FeasibleSet) -> Result<Vec<HyperParams>> {
        let base = init.to_vector();
        let mut points = vec![base];
        for (index, values) in &self.axes {
            if *index >= init.dim() {
                return Err(Error::InvalidParameter(format!("grid axis {index} out of range")));
            }
            if values.is_empty() {
                return Err(Error::InvalidParameter(format!("grid axis {index} has no values")));
            }
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q[*index] = *v;
                        q
                    })
                })
                .collect();
        }
        points
            .iter()
            .map(|p| {
                if !feasible.contains(p) {
                    return Err(Error::InvalidParameter(format!("grid point {:?} is infeasible", p.as_slice())));
                }
                init.with_vector(p)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TunerConfig {
    pub strategy: Strategy,
    /// Name used in reports; defaults to the strategy name.
    pub label: String,
    /// Learning rate (OHL, offline gradient).
    pub eta: f64,
    pub grid: GridSpec,
    /// Random configurations per tuning event.
    pub draws: usize,
    /// Stationarity threshold on the projected gradient norm (offline gradient).
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub feasible: FeasibleSet,
    pub init: HyperParams,
}

impl TunerConfig {
    pub fn new(strategy: Strategy, init: HyperParams, feasible: FeasibleSet) -> Self {
        Self {
            strategy,
            label: strategy.name().to_string(),
            eta: 1e-3,
            grid: GridSpec::default(),
            draws: 50,
            tol: 1e-6,
            max_iters: 50,
            seed: 0,
            feasible,
            init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        if self.feasible.dim() != self.init.dim() {
            return Err(Error::DimensionMismatch { expected: self.init.dim(), found: self.feasible.dim() });
        }
        if self.feasible.simplex() != self.simplex_block() {
            return Err(Error::InvalidParameter("feasible simplex block does not cover the mixture weights".into()));
        }
        if !self.feasible.contains(&self.init.to_vector()) {
            return Err(Error::InvalidParameter("initial hyperparameters are outside the feasible set".into()));
        }
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self.strategy {
            Strategy::Ohl if !(self.eta >= 0.0 && self.eta.is_finite()) => bad("eta must be nonnegative"),
            Strategy::OfflineGrad if !(self.eta > 0.0 && self.eta.is_finite()) => bad("eta must be positive"),
            Strategy::OfflineGrad if !(self.tol > 0.0) => bad("tol must be positive"),
            Strategy::Random if self.draws < 1 => bad("draws must be at least 1"),
            _ => Ok(()),
        }
    }

    fn simplex_block(&self) -> Range<usize> {
        let off = self.init.kernel.beta_offset();
        off..off + self.init.kernel.n_components()
    }
}

/// Work counters for one phase of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PhaseCounts {
    pub fits: usize,
    pub gram_builds: usize,
    pub jacobians: usize,
    pub gradient_evals: usize,
    #[serde(serialize_with = "serialize_secs")]
    pub wall: Duration,
}

fn serialize_secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl PhaseCounts {
    /// Counters only; wall-clock is ignored.
    pub fn same_counts(&self, other: &PhaseCounts) -> bool {
        (self.fits, self.gram_builds, self.jacobians, self.gradient_evals)
            == (other.fits, other.gram_builds, other.jacobians, other.gradient_evals)
    }

    fn fit(&mut self, hypers: &HyperParams, window: &[Sample]) -> Result<model::TrainedModel> {
        self.fits += 1;
        self.gram_builds += 1;
        model::fit(hypers, window)
    }
}

/// One prediction step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// Time index of the predicted sample.
    pub time: i64,
    pub y: f64,
    pub y_hat: f64,
    pub loss: f64,
    pub hypers: Vec<f64>,
    pub grad_norm: Option<f64>,
    pub proj_grad_norm: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub label: String,
    pub strategy: Strategy,
    pub eta: f64,
    pub hyper_names: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub tuning: PhaseCounts,
    pub prediction: PhaseCounts,
    pub tuning_events: usize,
    /// Local regret over the per-step hyper-gradients (OHL with `eta > 0` only).
    pub regret: RegretTrace,
}

impl RunTrace {
    pub fn predictions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.y_hat).collect()
    }

    pub fn squared_errors(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }

    pub fn final_hypers(&self) -> Option<&[f64]> {
        self.steps.last().map(|s| s.hypers.as_slice())
    }
}

/// Fit-count and wall-clock summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub steps: usize,
    pub tuning_events: usize,
    pub tuning: PhaseCounts,
    pub prediction: PhaseCounts,
    pub total_fits: usize,
    #[serde(serialize_with = "serialize_secs")]
    pub total_wall: Duration,
}

pub fn fit_count_report(trace: &RunTrace) -> FitSummary {
    FitSummary {
        steps: trace.steps.len(),
        tuning_events: trace.tuning_events,
        tuning: trace.tuning.clone(),
        prediction: trace.prediction.clone(),
        total_fits: trace.tuning.fits + trace.prediction.fits,
        total_wall: trace.tuning.wall + trace.prediction.wall,
    }
}

/// Training window of the model that predicts sample `i`: the `n` samples
/// whose targets are observed `h` steps ahead of `i`.
fn training_range(i: usize, n: usize, h: usize) -> Range<usize> {
    let end = i + 1 - h;
    end - n..end
}

/// Fit on a training slice, score one-step-ahead predictions on the validation slice.
#[derive(Clone, Copy, Debug)]
pub struct Backtest<'a> {
    pub train: &'a [Sample],
    pub validation: &'a [Sample],
}

impl<'a> Backtest<'a> {
    /// Backtest used when tuning before predicting sample `i`.
    pub fn before(stream: &'a Dataset, i: usize, schedule: &Schedule) -> Self {
        let h = stream.horizon();
        let v = training_range(i, schedule.validation_window, h);
        let s = training_range(v.start, schedule.train_window, h);
        let samples = stream.samples();
        Self { train: &samples[s], validation: &samples[v] }
    }

    pub fn rmse(&self, hypers: &HyperParams, counts: &mut PhaseCounts) -> Result<f64> {
        let model = counts.fit(hypers, self.train)?;
        let mut sse = 0.0;
        for s in self.validation {
            sse += model::loss(s.y, model.predict(&s.point)?);
        }
        Ok((sse / self.validation.len() as f64).sqrt())
    }

    /// Mean validation loss and its exact hyper-gradient.
    pub fn mean_loss_gradient(&self, hypers: &HyperParams, counts: &mut PhaseCounts) -> Result<(f64, DVector<f64>)> {
        let model = counts.fit(hypers, self.train)?;
        let jac = model.theta_jacobian();
        counts.jacobians += 1;
        let mut total = 0.0;
        let mut grad = DVector::zeros(hypers.dim());
        for s in self.validation {
            let (y_hat, g) = model.predict_with_gradient(&jac, &s.point, s.y)?;
            counts.gradient_evals += 1;
            total += model::loss(s.y, y_hat);
            grad += g;
        }
        let n = self.validation.len() as f64;
        Ok((total / n, grad / n))
    }
}

/// First configuration in grid order with the lowest validation RMSE.
pub fn tune_grid(grid: &[HyperParams], backtest: &Backtest<'_>, counts: &mut PhaseCounts) -> Result<HyperParams> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid is empty".into()));
    }
    let mut best = (f64::INFINITY, 0);
    for (i, h) in grid.iter().enumerate() {
        let rmse = backtest.rmse(h, counts)?;
        if rmse < best.0 {
            best = (rmse, i);
        }
    }
    Ok(grid[best.1].clone())
}

/// Draws one configuration: boxes uniformly (log-uniformly on log-scaled
/// boxes), mixture weights uniformly on the simplex.
pub fn sample_config<R: Rng + ?Sized>(
    template: &HyperParams,
    feasible: &FeasibleSet,
    rng: &mut R,
) -> Result<HyperParams> {
    let mut v = DVector::zeros(feasible.dim());
    for i in 0..feasible.dim() {
        if let Some(b) = feasible.interval(i) {
            v[i] = if b.lower == b.upper {
                b.lower
            } else {
                match b.scale {
                    Scale::Linear => rng.random_range(b.lower..=b.upper),
                    Scale::Log => rng.random_range(b.lower.ln()..=b.upper.ln()).exp().clamp(b.lower, b.upper),
                }
            };
        }
    }
    let block = feasible.simplex();
    let raw: Vec<f64> = block.clone().map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let weights = optim::project_simplex(&raw.iter().map(|e| e / total).collect::<Vec<_>>());
    v.as_mut_slice()[block].copy_from_slice(&weights);
    template.with_vector(&v)
}

/// Best of the incumbent and `config.draws` random configurations; the
/// incumbent wins ties.
pub fn tune_random<R: Rng + ?Sized>(
    config: &TunerConfig,
    incumbent: &HyperParams,
    backtest: &Backtest<'_>,
    rng: &mut R,
    counts: &mut PhaseCounts,
) -> Result<HyperParams> {
    let mut best = incumbent.clone();
    let mut best_rmse = backtest.rmse(incumbent, counts)?;
    for _ in 0..config.draws {
        let candidate = sample_config(incumbent, &config.feasible, rng)?;
        let rmse = backtest.rmse(&candidate, counts)?;
        if rmse < best_rmse {
            best_rmse = rmse;
            best = candidate;
        }
    }
    Ok(best)
}

/// Projected gradient descent on the mean validation loss, starting from
/// `init`, until `|P| <= tol` or `max_iters` fits.
pub fn tune_offline_gradient(
    config: &TunerConfig,
    init: &HyperParams,
    backtest: &Backtest<'_>,
    counts: &mut PhaseCounts,
) -> Result<HyperParams> {
    let set = &config.feasible;
    let mut z = init.to_vector();
    for _ in 0..config.max_iters {
        let hypers = init.with_vector(&z)?;
        let (_, grad) = backtest.mean_loss_gradient(&hypers, counts)?;
        if optim::projected_gradient(&z, &grad, config.eta, set).norm() <= config.tol {
            return Ok(hypers);
        }
        z = optim::project_c(&(&z - grad * config.eta), set);
    }
    init.with_vector(&z)
}

fn check_stream(stream: &Dataset, schedule: &Schedule, config: &TunerConfig) -> Result<usize> {
    schedule.validate()?;
    config.validate()?;
    if stream.lags() != stream.samples().first().map_or(0, |s| s.point.lags()) {
        return Err(Error::Data("dataset lag order is inconsistent".into()));
    }
    let warmup = schedule.warmup(stream.horizon());
    if stream.len() < warmup + 1 {
        return Err(Error::StreamTooShort { needed: warmup + 1, available: stream.len() });
    }
    Ok(warmup)
}

fn new_trace(config: &TunerConfig) -> RunTrace {
    RunTrace {
        label: config.label.clone(),
        strategy: config.strategy,
        eta: config.eta,
        hyper_names: config.init.names(),
        steps: Vec::new(),
        tuning: PhaseCounts::default(),
        prediction: PhaseCounts::default(),
        tuning_events: 0,
        regret: RegretTrace::new(),
    }
}

/// Dispatches on `config.strategy`.
pub fn run(config: &TunerConfig, schedule: &Schedule, stream: &Dataset) -> Result<RunTrace> {
    match config.strategy {
        Strategy::Ohl => run_ohl(config, schedule, stream),
        _ => run_rolling(config, schedule, stream),
    }
}

/// Online hyperparameter learning.
///
/// At every multiple of `m`: one lazy projected step on the averaged
/// accumulated hyper-gradients (skipped at `t = 0`), a refit, a fresh
/// Jacobian and an accumulator reset. At every step: predict, observe, and
/// accumulate the hyper-gradient once its target is observable (immediately
/// for one-step-ahead prediction).
pub fn run_ohl(config: &TunerConfig, schedule: &Schedule, stream: &Dataset) -> Result<RunTrace> {
    if config.strategy != Strategy::Ohl {
        return Err(Error::InvalidParameter(format!("run_ohl called with strategy {}", config.strategy)));
    }
    let warmup = check_stream(stream, schedule, config)?;
    let samples = stream.samples();
    let h = stream.horizon();
    let set = &config.feasible;
    let mut trace = new_trace(config);
    let mut z = config.init.to_vector();
    let mut acc = GradAccumulator::new(z.len());
    let mut pending: VecDeque<(usize, DVector<f64>)> = VecDeque::new();
    let mut fitted = None;

    for (t, i) in (warmup..samples.len()).enumerate() {
        if t % schedule.m == 0 {
            let clock = Instant::now();
            if t > 0 && acc.count() > 0 {
                z = optim::lazy_step(&z, &acc, config.eta, acc.count(), set)?;
            }
            trace.tuning.wall += clock.elapsed();

            let clock = Instant::now();
            let hypers = config.init.with_vector(&z)?;
            let model = trace.prediction.fit(&hypers, &samples[training_range(i, schedule.train_window, h)])?;
            trace.prediction.wall += clock.elapsed();

            let clock = Instant::now();
            let jac = model.theta_jacobian();
            trace.tuning.jacobians += 1;
            acc.reset();
            trace.tuning.wall += clock.elapsed();
            fitted = Some((model, jac));
        }
        let (model, jac) = fitted.as_ref().expect("fitted at t = 0");
        let sample = &samples[i];

        let clock = Instant::now();
        let (y_hat, grad) = model.predict_with_gradient(jac, &sample.point, sample.y)?;
        trace.tuning.gradient_evals += 1;
        let proj = (config.eta > 0.0).then(|| trace.regret.push(&z, &grad, config.eta, set));
        trace.steps.push(StepRecord {
            t,
            time: sample.point.t,
            y: sample.y,
            y_hat,
            loss: model::loss(sample.y, y_hat),
            hypers: z.as_slice().to_vec(),
            grad_norm: Some(grad.norm()),
            proj_grad_norm: proj,
        });
        pending.push_back((t + h - 1, grad));
        while pending.front().is_some_and(|(ready, _)| *ready <= t) {
            let (_, g) = pending.pop_front().unwrap();
            acc.add(&g);
        }
        trace.tuning.wall += clock.elapsed();
    }
    Ok(trace)
}

/// Rolling protocol for the offline strategies: re-tune every `n` steps,
/// refit every `m` steps, predict every step.
pub fn run_rolling(config: &TunerConfig, schedule: &Schedule, stream: &Dataset) -> Result<RunTrace> {
    if config.strategy == Strategy::Ohl {
        return Err(Error::InvalidParameter("run_rolling does not run OHL".into()));
    }
    let warmup = check_stream(stream, schedule, config)?;
    if config.strategy != Strategy::Fixed && schedule.validation_window == 0 {
        return Err(Error::InvalidParameter(format!("{} needs a validation window", config.strategy)));
    }
    let grid = match config.strategy {
        Strategy::Grid => config.grid.expand(&config.init, &config.feasible)?,
        _ => Vec::new(),
    };
    let samples = stream.samples();
    let h = stream.horizon();
    let mut trace = new_trace(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut hypers = config.init.clone();
    let mut model = None;

    for (t, i) in (warmup..samples.len()).enumerate() {
        if config.strategy != Strategy::Fixed && t % schedule.n == 0 {
            let clock = Instant::now();
            let backtest = Backtest::before(stream, i, schedule);
            let counts = &mut trace.tuning;
            hypers = match config.strategy {
                Strategy::Grid => tune_grid(&grid, &backtest, counts)?,
                Strategy::Random => tune_random(config, &hypers, &backtest, &mut rng, counts)?,
                Strategy::OfflineGrad => tune_offline_gradient(config, &hypers, &backtest, counts)?,
                Strategy::Fixed | Strategy::Ohl => unreachable!(),
            };
            trace.tuning_events += 1;
            trace.tuning.wall += clock.elapsed();
        }
        let clock = Instant::now();
        if t % schedule.m == 0 {
            model = Some(trace.prediction.fit(&hypers, &samples[training_range(i, schedule.train_window, h)])?);
        }
        let fitted = model.as_ref().expect("fitted at t = 0");
        let sample = &samples[i];
        let y_hat = fitted.predict(&sample.point)?;
        trace.steps.push(StepRecord {
            t,
            time: sample.point.t,
            y: sample.y,
            y_hat,
            loss: model::loss(sample.y, y_hat),
            hypers: fitted.hypers().to_vector().as_slice().to_vec(),
            grad_norm: None,
            proj_grad_norm: None,
        });
        trace.prediction.wall += clock.elapsed();
    }
    Ok(trace)
}
