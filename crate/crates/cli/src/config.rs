//! Declarative run configuration and its translation into core types.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ohl_core::data::{bin_series, build_features_with_horizon, generate_synthetic, load_csv, Aggregator, EmptyBins};
use ohl_core::tuners::GridSpec;
use ohl_core::{
    BaseKernel, CompositeSpec, Dataset, FeasibleSet, HyperParams, Interval, Schedule, Strategy, SyntheticConfig,
    TimeSeries, TunerConfig,
};
use serde::Deserialize;

use crate::Failure;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub strategies: Vec<StrategyConfig>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            schedule: ScheduleConfig::default(),
            model: ModelConfig::default(),
            strategies: vec![StrategyConfig::new(Strategy::Fixed), StrategyConfig::new(Strategy::Ohl)],
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Csv,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: Source,
    pub lags: usize,
    pub horizon: usize,
    pub synthetic: SyntheticSection,
    pub path: Option<PathBuf>,
    pub timestamp_column: String,
    pub value_column: String,
    /// Bin width in the series' time unit (seconds for ISO timestamps).
    pub bin_width: Option<i64>,
    pub aggregator: AggregatorName,
    pub fill_empty_bins: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: Source::Synthetic,
            lags: 20,
            horizon: 1,
            synthetic: SyntheticSection::default(),
            path: None,
            timestamp_column: "timestamp".into(),
            value_column: "value".into(),
            bin_width: None,
            aggregator: AggregatorName::Mean,
            fill_empty_bins: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregatorName {
    Sum,
    Mean,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub c1: f64,
    pub c2: f64,
    pub omega: f64,
    pub ar_order: usize,
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub noise_sd: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        Self {
            c1: d.c1,
            c2: d.c2,
            omega: d.omega,
            ar_order: d.ar_order,
            length: 1400,
            burn_in: d.burn_in,
            seed: d.seed,
            noise_sd: 0.01,
        }
    }
}

impl SyntheticSection {
    pub fn to_core(&self) -> SyntheticConfig {
        SyntheticConfig {
            c1: self.c1,
            c2: self.c2,
            omega: self.omega,
            ar_order: self.ar_order,
            length: self.length,
            burn_in: self.burn_in,
            seed: self.seed,
            noise_sd: self.noise_sd,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Steps between tuning events of the rolling tuners.
    pub n: usize,
    /// Steps between refits; OHL updates its hyperparameters at the same points.
    pub m: usize,
    pub train_window: usize,
    /// Backtest slice scored by the rolling tuners; 0 is allowed for FIXED and OHL.
    pub validation_window: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { n: 100, m: 10, train_window: 100, validation_window: 50 }
    }
}

/// `[lower, upper]` or `{ lower, upper, scale = "log" }`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum Bounds {
    Pair([f64; 2]),
    Table {
        lower: f64,
        upper: f64,
        #[serde(default)]
        scale: ScaleName,
    },
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleName {
    #[default]
    Linear,
    Log,
}

impl Bounds {
    fn interval(self) -> Interval {
        match self {
            Bounds::Pair([lower, upper]) => Interval::new(lower, upper),
            Bounds::Table { lower, upper, scale: ScaleName::Linear } => Interval::new(lower, upper),
            Bounds::Table { lower, upper, scale: ScaleName::Log } => Interval::log(lower, upper),
        }
    }
}

/// A scalar broadcast to every lag, or one value per lag.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PerLag {
    Scalar(f64),
    Each(Vec<f64>),
}

impl PerLag {
    fn expand(&self, lags: usize) -> Result<Vec<f64>, Failure> {
        match self {
            PerLag::Scalar(v) => Ok(vec![*v; lags]),
            PerLag::Each(v) if v.len() == lags => Ok(v.clone()),
            PerLag::Each(v) => Err(Failure::Config(format!("ard scales list has {} entries for {lags} lags", v.len()))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Periodic { nu: f64, omega: f64, beta: f64, nu_bounds: Bounds, omega_bounds: Bounds },
    Se { nu: f64, beta: f64, nu_bounds: Bounds },
    Ard { nu: PerLag, beta: f64, nu_bounds: Bounds },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub ridge: f64,
    pub ridge_bounds: Bounds,
    pub kernels: Vec<KernelConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            ridge: 1.0,
            ridge_bounds: Bounds::Pair([0.03, 3.0]),
            kernels: vec![KernelConfig::Se { nu: 0.1, beta: 1.0, nu_bounds: Bounds::Pair([1.5e-6, 0.2]) }],
        }
    }
}

impl ModelConfig {
    /// Initial hyperparameters and the feasible set, in flattened order.
    pub fn build(&self, lags: usize) -> Result<(HyperParams, FeasibleSet), Failure> {
        if self.kernels.is_empty() {
            return Err(Failure::Config("model needs at least one kernel".into()));
        }
        let mut components = Vec::new();
        let mut beta = Vec::new();
        let mut boxes = Vec::new();
        for k in &self.kernels {
            match k {
                KernelConfig::Periodic { nu, omega, beta: b, nu_bounds, omega_bounds } => {
                    components.push(BaseKernel::periodic(*nu, *omega));
                    boxes.extend([nu_bounds.interval(), omega_bounds.interval()]);
                    beta.push(*b);
                }
                KernelConfig::Se { nu, beta: b, nu_bounds } => {
                    components.push(BaseKernel::se(*nu));
                    boxes.push(nu_bounds.interval());
                    beta.push(*b);
                }
                KernelConfig::Ard { nu, beta: b, nu_bounds } => {
                    components.push(BaseKernel::ard(nu.expand(lags)?));
                    boxes.extend(std::iter::repeat_n(nu_bounds.interval(), lags));
                    beta.push(*b);
                }
            }
        }
        let n_beta = beta.len();
        let kernel = CompositeSpec::new(components, beta)?;
        let offset = kernel.beta_offset();
        let hypers = HyperParams::new(kernel, self.ridge)?;
        boxes.push(self.ridge_bounds.interval());
        let set = FeasibleSet::new(hypers.dim(), offset..offset + n_beta, boxes)?;
        Ok((hypers, set))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Hyperparameter name to candidate values.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            kind: strategy.name().into(),
            label: None,
            eta: None,
            draws: None,
            tol: None,
            max_iters: None,
            seed: None,
            grid: BTreeMap::new(),
        }
    }

    pub fn strategy(&self) -> Result<Strategy, Failure> {
        self.kind.parse().map_err(|e: ohl_core::Error| Failure::Config(e.to_string()))
    }

    pub fn build(&self, init: &HyperParams, set: &FeasibleSet) -> Result<TunerConfig, Failure> {
        let strategy = self.strategy()?;
        let mut c = TunerConfig::new(strategy, init.clone(), set.clone());
        if let Some(label) = &self.label {
            c.label = label.clone();
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.draws {
            c.draws = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        let names = init.names();
        let axes = self
            .grid
            .iter()
            .map(|(name, values)| match names.iter().position(|n| n == name) {
                Some(i) => Ok((i, values.clone())),
                None => Err(Failure::Config(format!(
                    "grid names unknown hyperparameter '{name}' (known: {})",
                    names.join(", ")
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        c.grid = GridSpec { axes };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Hash, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("ohl-out"), formats: vec![Format::Csv, Format::Json] }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub strategies: Vec<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub eta: Option<f64>,
    pub train_window: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Failure::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), Failure> {
        if let Some(path) = &o.data {
            self.data.source = Source::Csv;
            self.data.path = Some(path.clone());
        }
        if !o.strategies.is_empty() {
            let mut chosen = Vec::new();
            for name in &o.strategies {
                let strategy: Strategy = name.parse().map_err(|e: ohl_core::Error| Failure::Config(e.to_string()))?;
                let matching: Vec<StrategyConfig> =
                    self.strategies.iter().filter(|s| s.strategy().ok() == Some(strategy)).cloned().collect();
                if matching.is_empty() {
                    chosen.push(StrategyConfig::new(strategy));
                } else {
                    chosen.extend(matching);
                }
            }
            self.strategies = chosen;
        }
        if let Some(v) = o.n {
            self.schedule.n = v;
        }
        if let Some(v) = o.m {
            self.schedule.m = v;
        }
        if let Some(v) = o.train_window {
            self.schedule.train_window = v;
        }
        if let Some(v) = o.horizon {
            self.data.horizon = v;
        }
        for s in &mut self.strategies {
            let strategy = s.strategy()?;
            if let Some(eta) = o.eta {
                if matches!(strategy, Strategy::Ohl | Strategy::OfflineGrad) {
                    s.eta = Some(eta);
                }
            }
            if let Some(seed) = o.seed {
                s.seed = Some(seed);
            }
        }
        if let Some(seed) = o.seed {
            self.data.synthetic.seed = seed;
        }
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if !o.formats.is_empty() {
            self.output.formats = o.formats.clone();
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule, Failure> {
        let s = Schedule {
            n: self.schedule.n,
            m: self.schedule.m,
            train_window: self.schedule.train_window,
            validation_window: self.schedule.validation_window,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn series(&self) -> Result<TimeSeries, Failure> {
        let series = match self.data.source {
            Source::Synthetic => generate_synthetic(&self.data.synthetic.to_core())?,
            Source::Csv => {
                let path =
                    self.data.path.as_ref().ok_or_else(|| Failure::Config("csv source needs data.path".into()))?;
                load_csv(path, &self.data.timestamp_column, &self.data.value_column)?
            }
        };
        match self.data.bin_width {
            None => Ok(series),
            Some(width) => {
                let agg = match self.data.aggregator {
                    AggregatorName::Sum => Aggregator::Sum,
                    AggregatorName::Mean => Aggregator::Mean,
                };
                let empty = if self.data.fill_empty_bins { EmptyBins::ForwardFill } else { EmptyBins::Error };
                let binned = bin_series(&series, width, agg, empty)?;
                if !binned.filled.is_empty() {
                    eprintln!("warning: forward-filled {} empty bins", binned.filled.len());
                }
                Ok(binned.series)
            }
        }
    }

    pub fn dataset(&self) -> Result<Dataset, Failure> {
        if self.data.horizon == 0 {
            return Err(Failure::Config("horizon must be at least 1".into()));
        }
        Ok(build_features_with_horizon(&self.series()?, self.data.lags, self.data.horizon)?)
    }

    pub fn tuners(&self) -> Result<Vec<TunerConfig>, Failure> {
        if self.strategies.is_empty() {
            return Err(Failure::Config("at least one strategy is required".into()));
        }
        let (init, set) = self.model.build(self.data.lags)?;
        let tuners = self.strategies.iter().map(|s| s.build(&init, &set)).collect::<Result<Vec<_>, _>>()?;
        let mut labels: Vec<&str> = tuners.iter().map(|t| t.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Failure::Config("strategy labels must be unique".into()));
        }
        Ok(tuners)
    }
}
