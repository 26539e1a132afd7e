use std::io::Write;
use std::path::{Path, PathBuf};

use ohl_core::report::{format_number, write_regret_csv, write_rmse_csv, write_trace_csv};
use ohl_core::tuners::{self, fit_count_report};
use ohl_core::{Report, RunTrace};

use crate::config::{Format, Overrides, RunConfig, SyntheticSection};
use crate::output;
use crate::Failure;

pub struct GenerateArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub length: Option<usize>,
    pub noise_sd: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

pub fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let mut synth: SyntheticSection = RunConfig::load(args.config.as_deref())?.data.synthetic;
    if let Some(v) = args.seed {
        synth.seed = v;
    }
    if let Some(v) = args.length {
        synth.length = v;
    }
    if let Some(v) = args.noise_sd {
        synth.noise_sd = v;
    }
    if let Some(v) = args.c1 {
        synth.c1 = v;
    }
    if let Some(v) = args.c2 {
        synth.c2 = v;
    }
    let config = synth.to_core();
    config.validate()?;
    let series = ohl_core::data::generate_synthetic(&config)?;
    let mut out = output::create(&args.out)?;
    let io = |e: std::io::Error| Failure::Data(format!("writing {}: {e}", args.out.display()));
    writeln!(out, "timestamp,value").map_err(io)?;
    for (t, v) in series.timestamps().iter().zip(series.values()) {
        writeln!(out, "{t},{}", format_number(*v)).map_err(io)?;
    }
    out.flush().map_err(io)?;
    eprintln!("wrote {} points to {}", series.len(), args.out.display());
    Ok(())
}

pub fn run(config_path: Option<&Path>, overrides: &Overrides) -> Result<Report, Failure> {
    let mut config = RunConfig::load(config_path)?;
    config.apply(overrides)?;
    let schedule = config.schedule()?;
    let tuners = config.tuners()?;
    let dataset = config.dataset()?;

    let results: Vec<Result<RunTrace, ohl_core::Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = tuners
            .iter()
            .map(|tuner| {
                let (schedule, dataset) = (&schedule, &dataset);
                scope.spawn(move || tuners::run(tuner, schedule, dataset))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("strategy thread panicked")).collect()
    });
    let traces = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    for trace in &traces {
        if let Some(step) = trace.steps.iter().find(|s| !s.y_hat.is_finite()) {
            return Err(Failure::Numerical(format!("{}: non-finite prediction at step {}", trace.label, step.t)));
        }
    }
    let report = Report::from_traces(&traces)?;

    let dir = &config.output.dir;
    if config.output.formats.contains(&Format::Csv) {
        for trace in &traces {
            write_trace_csv(trace, output::create(&output::trace_path(dir, &trace.label))?)?;
        }
        write_rmse_csv(&report, output::create(&dir.join("rmse.csv"))?)?;
    }
    if config.output.formats.contains(&Format::Json) {
        output::write_json(&dir.join("report.json"), &report)?;
    }
    print_summary(&report, &traces);
    Ok(report)
}

fn print_summary(report: &Report, traces: &[RunTrace]) {
    println!("{} prediction steps", report.steps);
    println!(
        "{:<16} {:>14} {:>12} {:>8} {:>12} {:>10} {:>10}",
        "strategy", "final RMSE", "vs FIXED %", "events", "tuning fits", "total fits", "wall s"
    );
    for (s, trace) in report.strategies.iter().zip(traces) {
        let fits = fit_count_report(trace);
        let pct = s.improvement_pct.map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<16} {:>14.6e} {:>12} {:>8} {:>12} {:>10} {:>10.3}",
            s.label,
            s.final_rmse,
            pct,
            fits.tuning_events,
            fits.tuning.fits,
            fits.total_fits,
            fits.total_wall.as_secs_f64()
        );
    }
}

/// Squared projected-gradient norms from a trace file.
pub fn regret_terms(path: &Path) -> Result<Vec<f64>, Failure> {
    let data = |m: String| Failure::Data(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| data(e.to_string()))?;
    let headers = reader.headers().map_err(|e| data(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "proj_grad_norm")
        .ok_or_else(|| data("missing column 'proj_grad_norm'".into()))?;
    let mut terms = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data(e.to_string()))?;
        let line = i + 2;
        let raw = record.get(col).unwrap_or("").trim();
        if raw.is_empty() {
            return Err(data(format!("line {line}: no projected gradient (strategy without online hyper-gradients)")));
        }
        let v: f64 = raw.parse().map_err(|_| data(format!("line {line}: '{raw}' is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(data(format!("line {line}: invalid norm {raw}")));
        }
        terms.push(v * v);
    }
    if terms.is_empty() {
        return Err(data("trace has no rows".into()));
    }
    Ok(terms)
}

pub fn regret(traces: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    for path in traces {
        let terms = regret_terms(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
        let target = dir.join(format!("regret_{}.csv", stem.strip_prefix("trace_").unwrap_or(stem)));
        write_regret_csv(&terms, output::create(&target)?)?;
        let total: f64 = terms.iter().sum();
        println!(
            "{}: T = {}, R_T = {}, R_T/T = {} -> {}",
            path.display(),
            terms.len(),
            format_number(total),
            format_number(total / terms.len() as f64),
            target.display()
        );
    }
    Ok(())
}
