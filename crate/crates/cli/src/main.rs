//! `ohl`: run and compare hyperparameter tuning strategies for rolling
//! kernel ridge regression.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::GenerateArgs;
use crate::config::{Format, Overrides};

/// Failure classes, one exit code each.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ohl_core::Error> for Failure {
    fn from(e: ohl_core::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "ohl", version, about = "Online hyperparameter learning for rolling kernel ridge regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic stream as `timestamp,value` CSV.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "synthetic.csv")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        noise_sd: Option<f64>,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
    },
    /// Run the configured strategies on one stream and write traces and a report.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV file with `timestamp` and `value` columns (overrides the data source).
        #[arg(long)]
        data: Option<PathBuf>,
        /// FIXED, OHL, GRID, RANDOM or OFFLINE_GRAD; repeatable.
        #[arg(long = "strategy")]
        strategies: Vec<String>,
        /// Steps between tuning events.
        #[arg(long)]
        n: Option<usize>,
        /// Steps between refits.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        /// Training window length.
        #[arg(long)]
        train_window: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "format", value_enum)]
        formats: Vec<Format>,
    },
    /// Local regret `R_t` from the projected-gradient column of trace files.
    Regret {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Output directory (defaults to each trace's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { config, out, seed, length, noise_sd, c1, c2 } => {
            commands::generate(&GenerateArgs { config, out, seed, length, noise_sd, c1, c2 })
        }
        Command::Run { config, data, strategies, n, m, eta, train_window, horizon, seed, out, formats } => {
            let overrides = Overrides { data, strategies, n, m, eta, train_window, horizon, seed, out, formats };
            commands::run(config.as_deref(), &overrides).map(|_| ())
        }
        Command::Regret { traces, out } => commands::regret(&traces, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
