//! `uwbfp` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 malformed input
//! file, 4 pipeline failure, 5 I/O failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use uwbfp::eval::ReportFormat;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "uwbfp",
    version,
    about = "UWB range-fingerprint positioning experiments"
)]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or directory for `evaluate` (overrides paths.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Calibration model: one, two, three, four or none.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Correction ratio for measurements above the threshold.
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// Classifier: knn, tree, forest or vote.
    #[arg(long, global = true)]
    classifier: Option<String>,
    /// Soft-vote weights as KNN:TREE.
    #[arg(long, global = true)]
    weights: Option<String>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Text,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Delimited,
            Format::Text => ReportFormat::TextTable,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a measurement campaign and write the measurement file.
    Simulate,
    /// Fit a calibration model from a measurement file.
    Fit { measurements: Option<PathBuf> },
    /// Build the fingerprint database from a calibration file.
    BuildDb { calibration: Option<PathBuf> },
    /// Run the baseline and/or fingerprint pipelines and emit reports.
    Evaluate,
    /// Compare reports against the first (baseline) report.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RunConfig::parse(&text).map_err(|e| match e {
                CliError::Config { origin, msg } => CliError::Config {
                    origin: format!("{}: {origin}", path.display()),
                    msg,
                },
                other => other,
            })?
        }
        None => RunConfig::default(),
    };
    let flags = [
        ("run.seed", "--seed", cli.seed.map(|s| s.to_string())),
        (
            "paths.out",
            "--out",
            cli.out.as_ref().map(|p| p.display().to_string()),
        ),
        ("model.kind", "--model", cli.model.clone()),
        (
            "correction.ratio",
            "--ratio",
            cli.ratio.map(|r| r.to_string()),
        ),
        ("classifier.kind", "--classifier", cli.classifier.clone()),
        ("classifier.weights", "--weights", cli.weights.clone()),
    ];
    for (key, flag, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v, format!("flag {flag}"))?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let format = ReportFormat::from(cli.format);
    if let Command::Compare { reports } = &cli.command {
        return commands::compare_cmd(reports, cli.out.as_deref(), format);
    }
    let run_cfg = load_config(&cli)?;
    let cfg = run_cfg.resolve()?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Fit { measurements } => commands::fit(&cfg, measurements),
        Command::BuildDb { calibration } => commands::build_db_cmd(&cfg, calibration),
        Command::Evaluate => commands::evaluate(&cfg, &run_cfg, format),
        Command::Compare { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
