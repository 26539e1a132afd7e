//! Running RMSE and cross-strategy summaries.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tuners::{fit_count_report, FitSummary, RunTrace, Strategy};

/// Root mean square of the first `t` errors, given their squares.
pub fn rmse_t(sq_errors: &[f64], t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter("RMSE(t) needs t >= 1".into()));
    }
    if t > sq_errors.len() {
        return Err(Error::DimensionMismatch { expected: t, found: sq_errors.len() });
    }
    Ok((sq_errors[..t].iter().sum::<f64>() / t as f64).sqrt())
}

/// `RMSE(t)` for every `t = 1..=len`, accumulated in order.
pub fn rmse_series(sq_errors: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    sq_errors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            total += e;
            (total / (i + 1) as f64).sqrt()
        })
        .collect()
}

/// RMSE over the steps in `range` only.
pub fn window_rmse(sq_errors: &[f64], range: std::ops::Range<usize>) -> f64 {
    let slice = &sq_errors[range];
    (slice.iter().sum::<f64>() / slice.len() as f64).sqrt()
}

/// `(fixed - rmse) / fixed`; `None` when the reference is zero.
pub fn improvement(fixed_rmse: f64, rmse: f64) -> Option<f64> {
    (fixed_rmse > 0.0).then(|| (fixed_rmse - rmse) / fixed_rmse)
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyReport {
    pub label: String,
    pub strategy: Strategy,
    pub final_rmse: f64,
    /// Relative RMSE reduction against the FIXED run, as a fraction.
    pub improvement_vs_fixed: Option<f64>,
    pub improvement_pct: Option<f64>,
    pub fit_summary: FitSummary,
    pub rmse_t: Vec<f64>,
    /// `R_t` and `R_t / t`; empty for strategies without online hyper-gradients.
    pub regret_t: Vec<f64>,
    pub regret_per_step: Vec<f64>,
    pub hyper_names: Vec<String>,
    pub final_hypers: Vec<f64>,
    pub hyper_trajectory: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub steps: usize,
    pub strategies: Vec<StrategyReport>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn from_traces(traces: &[RunTrace]) -> Result<Self> {
        let Some(first) = traces.first() else {
            return Err(Error::InvalidParameter("report needs at least one run".into()));
        };
        let steps = first.steps.len();
        if traces.iter().any(|t| t.steps.len() != steps) {
            return Err(Error::Protocol("runs cover different numbers of steps".into()));
        }
        if steps == 0 {
            return Err(Error::Protocol("runs contain no prediction steps".into()));
        }
        let fixed_rmse = traces
            .iter()
            .find(|t| t.strategy == Strategy::Fixed)
            .map(|t| rmse_t(&t.squared_errors(), steps))
            .transpose()?;
        let strategies = traces
            .iter()
            .map(|trace| {
                let sq = trace.squared_errors();
                let final_rmse = rmse_t(&sq, steps)?;
                let imp = fixed_rmse.and_then(|f| improvement(f, final_rmse));
                let regret_t = trace.regret.totals().to_vec();
                let regret_per_step = regret_t.iter().enumerate().map(|(i, r)| r / (i + 1) as f64).collect();
                Ok(StrategyReport {
                    label: trace.label.clone(),
                    strategy: trace.strategy,
                    final_rmse,
                    improvement_vs_fixed: imp,
                    improvement_pct: imp.map(|v| 100.0 * v),
                    fit_summary: fit_count_report(trace),
                    rmse_t: rmse_series(&sq),
                    regret_t,
                    regret_per_step,
                    hyper_names: trace.hyper_names.clone(),
                    final_hypers: trace.final_hypers().unwrap_or_default().to_vec(),
                    hyper_trajectory: trace.steps.iter().map(|s| s.hypers.clone()).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let notes = vec![
            "Rolling tuners backtest one-step-ahead on the validation window with one fit per trial.".into(),
            "Rolling tuners refit on the same interval m as OHL.".into(),
            "OFFLINE_GRAD uses exact hyper-gradients.".into(),
        ];
        Ok(Self { steps, strategies, notes })
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Data(format!("writing CSV: {e}"))
}

/// Trace columns: `t, time, y, yhat, sq_err, rmse_t, grad_norm, proj_grad_norm`
/// followed by one column per hyperparameter. Missing gradient norms are empty.
pub fn write_trace_csv<W: Write>(trace: &RunTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["t", "time", "y", "yhat", "sq_err", "rmse_t", "grad_norm", "proj_grad_norm"].map(String::from).to_vec();
    header.extend(trace.hyper_names.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    let rmse = rmse_series(&trace.squared_errors());
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    for (step, r) in trace.steps.iter().zip(rmse) {
        let mut row = vec![
            step.t.to_string(),
            step.time.to_string(),
            format_number(step.y),
            format_number(step.y_hat),
            format_number(step.loss),
            format_number(r),
            opt(step.grad_norm),
            opt(step.proj_grad_norm),
        ];
        row.extend(step.hypers.iter().map(|v| format_number(*v)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(Error::Io)
}

/// Plot data: `t` (1-based) and one `RMSE(t)` column per strategy label.
pub fn write_rmse_csv<W: Write>(report: &Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(report.strategies.iter().map(|s| s.label.clone()));
    w.write_record(&header).map_err(csv_error)?;
    for t in 0..report.steps {
        let mut row = vec![(t + 1).to_string()];
        row.extend(report.strategies.iter().map(|s| format_number(s.rmse_t[t])));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(Error::Io)
}

/// `t, R_t, R_t / t` for a sequence of squared projected-gradient norms.
pub fn write_regret_csv<W: Write>(terms: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "regret", "regret_per_step"]).map_err(csv_error)?;
    let mut total = 0.0;
    for (i, term) in terms.iter().enumerate() {
        total += term;
        let t = i + 1;
        w.write_record([t.to_string(), format_number(total), format_number(total / t as f64)]).map_err(csv_error)?;
    }
    w.flush().map_err(Error::Io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse_t(&[0.0, 0.0, 0.0], 3).unwrap(), 0.0);
        let r = rmse_t(&[9.0, 16.0], 2).unwrap();
        assert!((r - (12.5f64).sqrt()).abs() < 1e-15);
        assert!((r - 3.5355).abs() < 1e-4);
        assert!(rmse_t(&[1.0], 0).is_err());
        let constant = rmse_series(&[2.25; 10]);
        assert!(constant.iter().all(|v| *v == 1.5));
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567, 0.0] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn regret_csv_rows() {
        let mut out = Vec::new();
        write_regret_csv(&[0.0, 4.0, 0.0], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "t,regret,regret_per_step");
        assert_eq!(rows.len(), 4);
        assert!(rows[2].starts_with("2,4.0000000000000000e0,2.0000000000000000e0"));
    }

    #[test]
    fn improvement_arithmetic() {
        assert_eq!(improvement(2.0, 1.5), Some(0.25));
        assert_eq!(improvement(2.0, 2.0), Some(0.0));
        assert_eq!(improvement(0.0, 1.0), None);
    }
}
