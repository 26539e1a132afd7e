//! Time series sources and autoregressive feature construction.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernels::TimedPoint;

/// Unit of a series' timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeAxis {
    /// Integer step indices.
    Steps,
    /// Seconds since the Unix epoch, parsed from ISO-8601 instants.
    Seconds,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
    axis: TimeAxis,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<i64>, values: Vec<f64>, axis: TimeAxis) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: timestamps.len(), found: values.len() });
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!("timestamps not strictly increasing at position {}", i + 1)));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at position {i}")));
        }
        Ok(Self { timestamps, values, axis })
    }

    /// Step-indexed series starting at 0.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let ts = (0..values.len() as i64).collect();
        Self::new(ts, values, TimeAxis::Steps)
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn axis(&self) -> TimeAxis {
        self.axis
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A lag vector paired with the target it predicts.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub point: TimedPoint,
    pub y: f64,
}

impl AsRef<TimedPoint> for Sample {
    fn as_ref(&self) -> &TimedPoint {
        &self.point
    }
}

/// Supervised pairs derived from a series, in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    lags: usize,
    horizon: usize,
}

impl Dataset {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One-step-ahead lag features: the target at index `i` is paired with the
/// `p` values preceding it, oldest first.
pub fn build_features(series: &TimeSeries, p: usize) -> Result<Dataset> {
    build_features_with_horizon(series, p, 1)
}

/// Direct `h`-step-ahead features: the lag vector for target `i` ends at `i - h`.
pub fn build_features_with_horizon(series: &TimeSeries, p: usize, h: usize) -> Result<Dataset> {
    if p == 0 || h == 0 {
        return Err(Error::InvalidParameter("lag order and horizon must be at least 1".into()));
    }
    let y = series.values();
    let first = p + h - 1;
    if y.len() <= first {
        return Err(Error::Data(format!("series of length {} too short for {p} lags at horizon {h}", y.len())));
    }
    let samples = (first..y.len())
        .map(|i| Sample { point: TimedPoint::new(i as i64, y[i + 1 - h - p..=i - h].to_vec()), y: y[i] })
        .collect();
    Ok(Dataset { samples, lags: p, horizon: h })
}

/// Parameters of the synthetic stream `y(t) = 1 + c1 AR(t) + c2 sin(t / omega)`.
///
/// The AR term applies coefficients `i / (2 |alpha|)`, `alpha_i = i`, to the
/// previous `ar_order` outputs of the noiseless process (missing lags are 0).
/// The first `burn_in` steps are discarded. Gaussian noise with standard
/// deviation `noise_sd` is added to the emitted observations only.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub c1: f64,
    pub c2: f64,
    pub omega: f64,
    pub ar_order: usize,
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub noise_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { c1: 0.5, c2: 0.5, omega: 5.0, ar_order: 20, length: 1100, burn_in: 100, seed: 0, noise_sd: 0.0 }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length <= self.ar_order || self.length <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "length {} must exceed ar_order {} and burn_in {}",
                self.length, self.ar_order, self.burn_in
            )));
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidParameter("omega must be positive".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter("noise_sd must be nonnegative".into()));
        }
        Ok(())
    }

    /// AR coefficients, lag 1 first.
    pub fn ar_coefficients(&self) -> Vec<f64> {
        let norm = (1..=self.ar_order).map(|i| (i * i) as f64).sum::<f64>().sqrt();
        (1..=self.ar_order).map(|i| i as f64 / (2.0 * norm)).collect()
    }
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<TimeSeries> {
    config.validate()?;
    let coef = config.ar_coefficients();
    let mut clean = Vec::with_capacity(config.length);
    for t in 0..config.length {
        let ar: f64 = coef.iter().enumerate().filter(|(i, _)| t > *i).map(|(i, a)| a * clean[t - 1 - i]).sum();
        clean.push(1.0 + config.c1 * ar + config.c2 * (t as f64 / config.omega).sin());
    }
    let mut values: Vec<f64> = clean[config.burn_in..].to_vec();
    if config.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, config.noise_sd).expect("validated noise_sd");
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    let timestamps = (config.burn_in as i64..config.length as i64).collect();
    TimeSeries::new(timestamps, values, TimeAxis::Steps)
}

fn parse_timestamp(raw: &str) -> Option<(i64, TimeAxis)> {
    if let Ok(v) = raw.parse::<i64>() {
        return Some((v, TimeAxis::Steps));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some((dt.timestamp(), TimeAxis::Seconds));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(|dt| (dt.and_utc().timestamp(), TimeAxis::Seconds))
}

/// Reads a series from a headered CSV file. Row numbers in diagnostics are
/// file line numbers (the header is line 1).
pub fn load_csv(path: &Path, timestamp_column: &str, value_column: &str) -> Result<TimeSeries> {
    let csv_err = |message: String| Error::Csv { path: path.to_path_buf(), message };
    let mut reader =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let column =
        |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| csv_err(format!("missing column '{name}'")));
    let ts_idx = column(timestamp_column)?;
    let val_idx = column(value_column)?;

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut axis = None;
    let mut blank_rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let raw_ts = record.get(ts_idx).unwrap_or("");
        let raw_val = record.get(val_idx).unwrap_or("");
        if raw_val.is_empty() {
            blank_rows.push(row);
            continue;
        }
        let (ts, row_axis) = parse_timestamp(raw_ts).ok_or_else(|| {
            csv_err(format!("row {row}, column '{timestamp_column}': cannot parse timestamp '{raw_ts}'"))
        })?;
        match axis {
            None => axis = Some(row_axis),
            Some(a) if a != row_axis => {
                return Err(csv_err(format!("row {row}: mixed integer and ISO-8601 timestamps")));
            }
            _ => {}
        }
        let value: f64 = raw_val
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| csv_err(format!("row {row}, column '{value_column}': invalid value '{raw_val}'")))?;
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(csv_err(format!("row {row}: timestamp not strictly increasing")));
            }
        }
        timestamps.push(ts);
        values.push(value);
    }
    if !blank_rows.is_empty() {
        let rows: Vec<String> = blank_rows.iter().map(u64::to_string).collect();
        return Err(csv_err(format!("missing values in column '{value_column}' at rows {}", rows.join(", "))));
    }
    if values.is_empty() {
        return Err(csv_err("no data rows".into()));
    }
    TimeSeries::new(timestamps, values, axis.unwrap_or(TimeAxis::Steps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    Sum,
    Mean,
}

/// Treatment of bins that receive no observations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmptyBins {
    Error,
    ForwardFill,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binned {
    pub series: TimeSeries,
    /// Output positions that were forward-filled.
    pub filled: Vec<usize>,
}

/// Aggregates observations into bins `[first + k w, first + (k + 1) w)`, with
/// `w` in the series' own time unit.
pub fn bin_series(series: &TimeSeries, width: i64, aggregator: Aggregator, empty: EmptyBins) -> Result<Binned> {
    if width <= 0 {
        return Err(Error::InvalidParameter("bin width must be positive".into()));
    }
    let (Some(&first), Some(&last)) = (series.timestamps.first(), series.timestamps.last()) else {
        return Err(Error::Data("cannot bin an empty series".into()));
    };
    let bins = ((last - first) / width + 1) as usize;
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (ts, v) in series.timestamps.iter().zip(&series.values) {
        let k = ((ts - first) / width) as usize;
        sums[k] += v;
        counts[k] += 1;
    }
    let mut values = Vec::with_capacity(bins);
    let mut filled = Vec::new();
    for k in 0..bins {
        if counts[k] == 0 {
            match (empty, values.last()) {
                (EmptyBins::ForwardFill, Some(&prev)) => {
                    values.push(prev);
                    filled.push(k);
                }
                _ => return Err(Error::Data(format!("bin {k} starting at {} is empty", first + k as i64 * width))),
            }
            continue;
        }
        values.push(match aggregator {
            Aggregator::Sum => sums[k],
            Aggregator::Mean => sums[k] / counts[k] as f64,
        });
    }
    let timestamps = (0..bins as i64).map(|k| first + k * width).collect();
    Ok(Binned { series: TimeSeries::new(timestamps, values, series.axis)?, filled })
}
