//! Fixtures shared by the benchmarks.

use ohl_core::data::{build_features, generate_synthetic};
use ohl_core::{BaseKernel, CompositeSpec, Dataset, FeasibleSet, HyperParams, Interval, Sample, SyntheticConfig};

pub const LAGS: usize = 20;

/// Noisy synthetic stream with `LAGS` lag features and `len` samples.
pub fn stream(len: usize) -> Dataset {
    let config = SyntheticConfig { length: len + LAGS + 100, noise_sd: 0.01, ..SyntheticConfig::default() };
    build_features(&generate_synthetic(&config).expect("valid config"), LAGS).expect("long enough")
}

pub fn window(stream: &Dataset, n: usize) -> &[Sample] {
    &stream.samples()[..n]
}

/// Periodic + ARD mixture with its box × simplex feasible set.
pub fn mixture() -> (HyperParams, FeasibleSet) {
    let kernel =
        CompositeSpec::new(vec![BaseKernel::periodic(1.0, 5.0), BaseKernel::ard(vec![1e-3; LAGS])], vec![0.5, 0.5])
            .expect("valid mixture");
    let offset = kernel.beta_offset();
    let hypers = HyperParams::new(kernel, 1.0).expect("valid hypers");
    let mut boxes = vec![Interval::log(0.01, 100.0), Interval::new(2.0, 50.0)];
    boxes.extend(std::iter::repeat_n(Interval::log(1.5e-6, 1.5e-2), LAGS));
    boxes.push(Interval::new(0.03, 3.0));
    let set = FeasibleSet::new(hypers.dim(), offset..offset + 2, boxes).expect("valid set");
    (hypers, set)
}
