use std::fs;
use std::path::{Path, PathBuf};

use uwbfp::calibration::{fit_model, CalibrationModel};
use uwbfp::eval::{
    compare, emit_report, parse_report, prepare_observations, run_baseline_in, run_ml,
    ComparisonTable, ErrorReport, ReportFormat, SEED_CAMPAIGN, SEED_SELECTION,
};
use uwbfp::fingerprint::build_db;
use uwbfp::simulator::{
    derive_seed, read_measurements, simulate_campaign, write_measurements, Campaign, NoiseConfig,
};

use crate::config::{Pipelines, Resolved, RunConfig};
use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to `out` when given, else stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn input(arg: Option<PathBuf>, fallback: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    arg.or(fallback).ok_or_else(|| {
        CliError::Usage(format!(
            "missing {what} path (argument or paths.* config key)"
        ))
    })
}

pub fn simulate(cfg: &Resolved) -> Result<(), CliError> {
    let campaign = Campaign {
        locations: cfg.campaign_locations.clone(),
        reps: cfg.campaign_reps,
        anchors: cfg.anchors,
        noise: NoiseConfig {
            seed: derive_seed(cfg.pipeline.seed, SEED_CAMPAIGN),
            ..cfg.pipeline.noise
        },
    };
    campaign.validate(&cfg.spec)?;
    let rows = simulate_campaign(&campaign);
    emit(cfg.out.as_deref(), &write_measurements(&rows))?;
    eprintln!("{} rows", rows.len());
    Ok(())
}

pub fn fit(cfg: &Resolved, measurements: Option<PathBuf>) -> Result<(), CliError> {
    let kind = cfg
        .pipeline
        .model_kind
        .ok_or_else(|| CliError::Usage("fit requires model.kind other than none".into()))?;
    let path = input(measurements, cfg.measurements.clone(), "measurement")?;
    let rows = read_measurements(&read(&path)?).map_err(|e| CliError::parse(&path, e))?;
    let cal = &cfg.pipeline.calibration;
    let obs = prepare_observations(
        &rows,
        &cal.reference_points,
        cal.mad,
        &cfg.pipeline.correction,
    )?;
    let fit = fit_model(
        kind,
        &obs,
        &cfg.anchors,
        cal.n_select,
        derive_seed(cfg.pipeline.seed, SEED_SELECTION),
    )?;
    log::info!(
        "fitted {kind} from {} sets ({} skipped)",
        fit.sets_selected,
        fit.sets_skipped
    );
    emit(cfg.out.as_deref(), &fit.model.to_text())
}

pub fn build_db_cmd(cfg: &Resolved, calibration: Option<PathBuf>) -> Result<(), CliError> {
    let path = input(calibration, cfg.calibration.clone(), "calibration")?;
    let model =
        CalibrationModel::from_text(&read(&path)?).map_err(|e| CliError::parse(&path, e))?;
    let db = build_db(&model, &cfg.spec, &cfg.anchors)?;
    emit(cfg.out.as_deref(), &db.to_text())?;
    eprintln!("{} cells", db.len());
    Ok(())
}

fn with_config_echo(mut report: ErrorReport, run: &RunConfig) -> ErrorReport {
    for (k, v) in run.entries() {
        report.metadata.insert(format!("config.{k}"), v.to_string());
    }
    report
}

fn extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Delimited => "csv",
        ReportFormat::TextTable => "txt",
    }
}

fn render_comparison(table: &ComparisonTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Delimited => table.to_delimited(),
        ReportFormat::TextTable => table.to_text_table(),
    }
}

/// Runs the configured pipelines. With an output directory, writes
/// `baseline`, `ml` and (when both ran) `comparison` files into it;
/// otherwise prints the reports.
pub fn evaluate(cfg: &Resolved, run: &RunConfig, format: ReportFormat) -> Result<(), CliError> {
    let mut reports: Vec<(&str, ErrorReport)> = Vec::new();
    if matches!(cfg.pipelines, Pipelines::Both | Pipelines::Baseline) {
        let base_cfg = uwbfp::eval::PipelineConfig {
            model_kind: None,
            correction: cfg.baseline_correction,
            ..cfg.pipeline.clone()
        };
        log::info!("running trilateration baseline");
        let report = run_baseline_in(&base_cfg, &cfg.anchors, &cfg.spec)?;
        reports.push(("baseline", with_config_echo(report, run)));
    }
    if matches!(cfg.pipelines, Pipelines::Both | Pipelines::Ml) {
        log::info!("running fingerprint pipeline");
        let report = run_ml(&cfg.pipeline, &cfg.anchors, &cfg.spec)?;
        reports.push(("ml", with_config_echo(report, run)));
    }
    let comparison = if reports.len() == 2 {
        Some(compare(&[reports[0].1.clone(), reports[1].1.clone()])?)
    } else {
        None
    };

    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let ext = extension(format);
            for (name, report) in &reports {
                let path = dir.join(format!("{name}.{ext}"));
                write(&path, &emit_report(report, format))?;
                eprintln!("wrote {}", path.display());
            }
            if let Some(table) = &comparison {
                let path = dir.join(format!("comparison.{ext}"));
                write(&path, &render_comparison(table, format))?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let docs: Vec<String> = reports
                .iter()
                .map(|(_, r)| emit_report(r, format))
                .collect();
            print!("{}", docs.join("\n"));
        }
    }
    Ok(())
}

pub fn compare_cmd(
    paths: &[PathBuf],
    out: Option<&Path>,
    format: ReportFormat,
) -> Result<(), CliError> {
    if paths.len() < 2 {
        return Err(CliError::Usage(
            "compare needs a baseline report and at least one other".into(),
        ));
    }
    let reports = paths
        .iter()
        .map(|p| {
            let mut r = parse_report(&read(p)?).map_err(|e| CliError::parse(p, e))?;
            r.metadata
                .entry("source".into())
                .or_insert_with(|| p.display().to_string());
            Ok(r)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = compare(&reports)?;
    emit(out, &render_comparison(&table, format))
}
