//! Projections onto the feasible set, projected gradients, lazy windowed
//! updates and local-regret bookkeeping.
//!
//! The feasible set is the product of per-coordinate boxes and a single
//! probability simplex over the mixture weights, so the Euclidean projection
//! decomposes blockwise.

use std::cmp::Ordering;
use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::SIMPLEX_TOL;

/// How a box coordinate is sampled by random search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper, scale: Scale::Linear }
    }

    pub fn log(lower: f64, upper: f64) -> Self {
        Self { lower, upper, scale: Scale::Log }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Slot {
    Box(Interval),
    Simplex,
}

/// Box bounds on every coordinate outside `simplex`, and the probability
/// simplex on the coordinates inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleSet {
    slots: Vec<Slot>,
    simplex: Range<usize>,
}

impl FeasibleSet {
    /// `boxes` are assigned in order to the coordinates outside `simplex`.
    pub fn new(dim: usize, simplex: Range<usize>, boxes: Vec<Interval>) -> Result<Self> {
        if simplex.is_empty() || simplex.end > dim {
            return Err(Error::InvalidParameter(format!(
                "simplex block {simplex:?} must be nonempty and inside 0..{dim}"
            )));
        }
        if boxes.len() + simplex.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim - simplex.len(), found: boxes.len() });
        }
        if let Some(b) = boxes.iter().find(|b| !(b.lower <= b.upper)) {
            return Err(Error::InvalidParameter(format!("box lower {} exceeds upper {}", b.lower, b.upper)));
        }
        if boxes.iter().any(|b| b.scale == Scale::Log && !(b.lower > 0.0)) {
            return Err(Error::InvalidParameter("log-scaled box needs a positive lower bound".into()));
        }
        let mut boxes = boxes.into_iter();
        let slots = (0..dim)
            .map(|i| if simplex.contains(&i) { Slot::Simplex } else { Slot::Box(boxes.next().unwrap()) })
            .collect();
        Ok(Self { slots, simplex })
    }

    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn simplex(&self) -> Range<usize> {
        self.simplex.clone()
    }

    /// The box on coordinate `i`, or `None` inside the simplex block.
    pub fn interval(&self, i: usize) -> Option<&Interval> {
        match &self.slots[i] {
            Slot::Box(b) => Some(b),
            Slot::Simplex => None,
        }
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        if v.len() != self.dim() {
            return false;
        }
        let boxes_ok = self.slots.iter().zip(v.iter()).all(|(s, x)| match s {
            Slot::Box(b) => *x >= b.lower && *x <= b.upper,
            Slot::Simplex => *x >= 0.0,
        });
        let sum: f64 = v.as_slice()[self.simplex.clone()].iter().sum();
        boxes_ok && (sum - 1.0).abs() <= SIMPLEX_TOL
    }
}

fn check_dim(set: &FeasibleSet, v: &DVector<f64>) {
    assert_eq!(v.len(), set.dim(), "vector dimension does not match feasible set");
}

/// Clamps box coordinates; the simplex block is copied through unchanged.
pub fn project_box(v: &DVector<f64>, set: &FeasibleSet) -> DVector<f64> {
    check_dim(set, v);
    DVector::from_iterator(
        v.len(),
        set.slots.iter().zip(v.iter()).map(|(s, x)| match s {
            Slot::Box(b) => b.clamp(*x),
            Slot::Simplex => *x,
        }),
    )
}

/// Euclidean projection onto `{b : sum(b) = 1, b >= 0}` by sort and threshold.
///
/// Inputs already on the simplex (within `SIMPLEX_TOL`) are returned unchanged.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "simplex projection needs at least one coordinate");
    let sum: f64 = v.iter().sum();
    if v.iter().all(|x| *x >= 0.0) && (sum - 1.0).abs() <= SIMPLEX_TOL {
        return v.to_vec();
    }
    // descending by value, ties by index
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumsum += v[i];
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v[i] - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Joint projection onto the box × simplex feasible set.
pub fn project_c(v: &DVector<f64>, set: &FeasibleSet) -> DVector<f64> {
    let mut out = project_box(v, set);
    let block = set.simplex();
    let projected = project_simplex(&v.as_slice()[block.clone()]);
    out.as_mut_slice()[block].copy_from_slice(&projected);
    out
}

/// `(z - Pi_C(z - eta g)) / eta`.
pub fn projected_gradient(z: &DVector<f64>, g: &DVector<f64>, eta: f64, set: &FeasibleSet) -> DVector<f64> {
    assert!(eta > 0.0, "projected gradient needs eta > 0");
    (z - project_c(&(z - g * eta), set)) / eta
}

/// Running sum of per-step gradients inside one update window.
#[derive(Clone, Debug, PartialEq)]
pub struct GradAccumulator {
    sum: DVector<f64>,
    count: usize,
}

impl GradAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { sum: DVector::zeros(dim), count: 0 }
    }

    pub fn add(&mut self, g: &DVector<f64>) {
        self.sum += g;
        self.count += 1;
    }

    pub fn reset(&mut self) {
        self.sum.fill(0.0);
        self.count = 0;
    }

    pub fn sum(&self) -> &DVector<f64> {
        &self.sum
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// `Pi_C(z - (eta / m) * sum)` once exactly `m` gradients have been accumulated.
pub fn lazy_step(
    z: &DVector<f64>,
    acc: &GradAccumulator,
    eta: f64,
    m: usize,
    set: &FeasibleSet,
) -> Result<DVector<f64>> {
    if m == 0 || acc.count != m {
        return Err(Error::Protocol(format!("lazy update expects {m} accumulated gradients, found {}", acc.count)));
    }
    Ok(project_c(&(z - &acc.sum * (eta / m as f64)), set))
}

/// Squared projected-gradient norms and their running total.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretTrace {
    terms: Vec<f64>,
    totals: Vec<f64>,
}

impl RegretTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `|P(z, g, eta)|^2` and returns the projected gradient norm.
    pub fn push(&mut self, z: &DVector<f64>, g: &DVector<f64>, eta: f64, set: &FeasibleSet) -> f64 {
        let p = projected_gradient(z, g, eta, set);
        let term = p.norm_squared();
        self.push_term(term);
        term.sqrt()
    }

    pub fn push_term(&mut self, term: f64) {
        let prev = self.total();
        self.terms.push(term);
        self.totals.push(prev + term);
    }

    pub fn terms(&self) -> &[f64] {
        &self.terms
    }

    /// `R_t` after each step.
    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    pub fn total(&self) -> f64 {
        self.totals.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn regret_update(
    mut trace: RegretTrace,
    z: &DVector<f64>,
    g: &DVector<f64>,
    eta: f64,
    set: &FeasibleSet,
) -> RegretTrace {
    trace.push(z, g, eta, set);
    trace
}

/// Empirical gradient variation within a window of `m` losses: the maximum
/// over `grid` of `sum_i |grad f_i(z) - mean_j grad f_j(z)|^2`.
pub fn variation_m<F>(gradients: &[F], grid: &[DVector<f64>]) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    assert!(!gradients.is_empty() && !grid.is_empty(), "variation needs gradients and grid points");
    let m = gradients.len() as f64;
    grid.iter()
        .map(|z| {
            let gs: Vec<DVector<f64>> = gradients.iter().map(|g| g(z)).collect();
            let mean = gs.iter().fold(DVector::zeros(z.len()), |acc, g| acc + g) / m;
            gs.iter().map(|g| (g - &mean).norm_squared()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}
