//! Batch command-line driver for the forecasting benchmark.
//!
//! Every subcommand is non-interactive and deterministic given its flags and
//! the global `--seed`; nothing reads the clock or standard input. Exit codes:
//! 0 success, 1 usage error, 2 data/config error, 3 model/runtime error.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use damcast_core::bench::{
    parse_config, parse_traces_csv, recompute_results, results_csv_text, run_experiment,
    train_cell_model, dataset_scaler, emit_report, invert_predictions, scale_dataset, BenchError,
    ModelKind, Overrides, MODEL_NAMES,
};
use damcast_core::data::{
    gen_synthetic, ingest_csv, interpolate_missing, shift_timesteps, split_monthly,
    write_frame_csv, CsvSchema, DataError, SupervisedDataset, SyntheticSpec, TimeSeriesFrame,
    WINDOW_CHOICES,
};
use damcast_core::metrics::{compute_metrics, naive_persistence, MetricsError};
use damcast_core::model_io::{read_model, write_model, ModelFile, ModelIoError, SavedModel};
use damcast_core::numfmt::sig6;

const N_LAGS: usize = 24;

#[derive(Parser)]
#[command(
    name = "damcast",
    version,
    about = "Day-ahead electricity price forecasting benchmark",
    disable_help_subcommand = true
)]
struct Cli {
    /// Seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for grid execution (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Suppress informational output; results and errors still print.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hourly market data file.
    Synth {
        /// Whole days to generate (at least 1).
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        days: u32,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional key-value file overriding generator parameters.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Validate a data file and report its shape.
    IngestCheck {
        /// CSV file in the ingestion schema.
        #[arg(long)]
        data: PathBuf,
    },
    /// Train one model on one month's training window and save it.
    Train {
        /// CSV file in the ingestion schema.
        #[arg(long)]
        data: PathBuf,
        /// Model name.
        #[arg(long)]
        model: String,
        /// Training window length in days.
        #[arg(long)]
        window: u32,
        /// Test month as YYYY-MM; training uses the days before its held-out tail.
        #[arg(long)]
        month: String,
        /// Output model path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model on one month's held-out days.
    Evaluate {
        /// CSV file in the ingestion schema.
        #[arg(long)]
        data: PathBuf,
        /// Model file written by `train`.
        #[arg(long)]
        model_file: PathBuf,
        /// Training window length in days (fixes the split geometry).
        #[arg(long)]
        window: u32,
        /// Test month as YYYY-MM.
        #[arg(long)]
        month: String,
    },
    /// Run a (market x window x model x month) grid from a config file.
    Benchmark {
        /// Flat key-value experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Write reports here instead of the config's `out` directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the results table from an emitted trace file.
    Report {
        /// traces.csv from a benchmark report directory.
        #[arg(long)]
        traces: PathBuf,
        /// Write the recomputed CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// An error carrying the exit code it maps to.
#[derive(Debug)]
struct CmdError {
    code: i32,
    msg: String,
}

fn usage(msg: impl Display) -> CmdError {
    CmdError {
        code: 1,
        msg: msg.to_string(),
    }
}

fn data_err(msg: impl Display) -> CmdError {
    CmdError {
        code: 2,
        msg: msg.to_string(),
    }
}

impl From<DataError> for CmdError {
    fn from(e: DataError) -> Self {
        data_err(e)
    }
}

impl From<ModelIoError> for CmdError {
    fn from(e: ModelIoError) -> Self {
        data_err(e)
    }
}

impl From<MetricsError> for CmdError {
    fn from(e: MetricsError) -> Self {
        CmdError {
            code: 3,
            msg: e.to_string(),
        }
    }
}

impl From<BenchError> for CmdError {
    fn from(e: BenchError) -> Self {
        let code = match e {
            BenchError::Config { .. }
            | BenchError::Data(_)
            | BenchError::NoFeasibleCells
            | BenchError::OutputUnwritable(_)
            | BenchError::MalformedReportFile { .. } => 2,
            BenchError::Boost(_) | BenchError::Lstm(_) | BenchError::Metrics(_) => 3,
        };
        CmdError {
            code,
            msg: e.to_string(),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reserves 2 for usage errors; this tool uses 1 and keeps 2
            // for data errors. Help and version remain success.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.msg);
            process::exit(e.code);
        }
    }
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Synth { days, out, spec } => cmd_synth(days, cli.seed, &out, spec.as_deref(), cli.quiet),
        Command::IngestCheck { data } => cmd_ingest_check(&data),
        Command::Train {
            data,
            model,
            window,
            month,
            out,
        } => cmd_train(&data, &model, window, &month, &out, cli.seed, cli.quiet),
        Command::Evaluate {
            data,
            model_file,
            window,
            month,
        } => cmd_evaluate(&data, &model_file, window, &month),
        Command::Benchmark { config, out } => cmd_benchmark(&config, out, cli.jobs, cli.quiet),
        Command::Report { traces, out } => cmd_report(&traces, out, cli.quiet),
    }
}

fn cmd_synth(
    days: u32,
    seed: u64,
    out: &Path,
    spec: Option<&Path>,
    quiet: bool,
) -> Result<(), CmdError> {
    let spec = match spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
            SyntheticSpec::from_kv_text(&text)?
        }
        None => SyntheticSpec::default(),
    };
    let frame = gen_synthetic(days, &spec, seed);
    write_frame_csv(&frame, out)?;
    if !quiet {
        println!("wrote {} hours to {}", frame.n_hours(), out.display());
    }
    Ok(())
}

fn cmd_ingest_check(data: &Path) -> Result<(), CmdError> {
    let frame = ingest_csv(data, &CsvSchema::default())?;
    let last = frame.time_at(frame.n_hours() - 1);
    println!("file: {}", data.display());
    println!(
        "hours: {} ({} .. {})",
        frame.n_hours(),
        frame.start().format("%Y-%m-%dT%H:%M:%SZ"),
        last.format("%Y-%m-%dT%H:%M:%SZ"),
    );
    println!("columns:");
    for name in frame.column_names() {
        println!("  {name}: {} missing", frame.missing_count(name));
    }
    interpolate_missing(&frame)?;
    println!("interpolation: ok");
    Ok(())
}

/// "YYYY-MM" with a real month number.
fn parse_month(text: &str) -> Result<(i32, u32), CmdError> {
    let (y, m) = text
        .split_once('-')
        .ok_or_else(|| usage(format!("bad month {text:?} (want YYYY-MM)")))?;
    let ok = y.len() == 4 && m.len() == 2 && y.bytes().all(|b| b.is_ascii_digit());
    let year: i32 = ok
        .then(|| y.parse().ok())
        .flatten()
        .ok_or_else(|| usage(format!("bad month {text:?} (want YYYY-MM)")))?;
    let month: u32 = m
        .parse()
        .ok()
        .filter(|m| (1..=12).contains(m))
        .ok_or_else(|| usage(format!("bad month {text:?} (want YYYY-MM)")))?;
    Ok((year, month))
}

fn parse_window(window: u32) -> Result<u32, CmdError> {
    if WINDOW_CHOICES.contains(&window) {
        Ok(window)
    } else {
        Err(usage(format!(
            "window {window} not supported; choose one of {WINDOW_CHOICES:?}"
        )))
    }
}

fn trainable_model(name: &str) -> Result<ModelKind, CmdError> {
    let trainable: Vec<&str> = MODEL_NAMES.iter().copied().filter(|n| *n != "naive").collect();
    match ModelKind::from_name(name) {
        Some(ModelKind::Naive) => Err(usage(format!(
            "model naive has no parameters to train; valid models: {}",
            trainable.join(", ")
        ))),
        Some(kind) => Ok(kind),
        None => Err(usage(format!(
            "unknown model {name:?}; valid models: {}",
            trainable.join(", ")
        ))),
    }
}

/// Ingest, interpolate, and lag-shift a market file into supervised rows.
fn load_dataset(data: &Path) -> Result<(TimeSeriesFrame, SupervisedDataset), CmdError> {
    let raw = ingest_csv(data, &CsvSchema::default())?;
    let frame = interpolate_missing(&raw)?;
    let ds = shift_timesteps(&frame, N_LAGS)?;
    Ok((frame, ds))
}

fn cmd_train(
    data: &Path,
    model: &str,
    window: u32,
    month: &str,
    out: &Path,
    seed: u64,
    quiet: bool,
) -> Result<(), CmdError> {
    let kind = trainable_model(model)?;
    let window = parse_window(window)?;
    let (year, month) = parse_month(month)?;
    let (_, ds) = load_dataset(data)?;
    let split = split_monthly(&ds, window, year, month)?;

    let scaler = dataset_scaler(&split.train)?;
    let train_scaled = scale_dataset(&split.train, &scaler)?;
    let trained = train_cell_model(kind, &train_scaled, &Overrides::default(), seed)?;

    let scaled_preds = trained.predict(&train_scaled)?;
    let preds = invert_predictions(&scaler, &scaled_preds)?;
    let actual = split.train.y();
    let mae = preds
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum::<f64>()
        / actual.len() as f64;

    let saved = match trained {
        damcast_core::bench::TrainedModel::Ensemble(e) => SavedModel::Ensemble(e),
        damcast_core::bench::TrainedModel::Lstm(m) => SavedModel::LstmFfec(m),
    };
    write_model(
        out,
        &ModelFile {
            model: saved,
            scaler: Some(scaler),
        },
    )?;
    println!("train mae {}", sig6(mae));
    if !quiet {
        println!("model written to {}", out.display());
    }
    Ok(())
}

fn cmd_evaluate(
    data: &Path,
    model_file: &Path,
    window: u32,
    month: &str,
) -> Result<(), CmdError> {
    let window = parse_window(window)?;
    let (year, month) = parse_month(month)?;
    let file = read_model(model_file)?;
    let scaler = file.scaler.ok_or_else(|| {
        data_err(format!(
            "{} has no scaler record; cannot map predictions back to prices",
            model_file.display()
        ))
    })?;
    let (frame, ds) = load_dataset(data)?;
    let split = split_monthly(&ds, window, year, month)?;

    let test_scaled = scale_dataset(&split.test, &scaler)?;
    let scaled_preds = match &file.model {
        SavedModel::Ensemble(e) => e
            .predict_dataset(&test_scaled)
            .map_err(|e| CmdError { code: 3, msg: e.to_string() })?,
        SavedModel::LstmFfec(m) => m
            .predict_dataset(&test_scaled)
            .map_err(|e| CmdError { code: 3, msg: e.to_string() })?,
    };
    let preds = invert_predictions(&scaler, &scaled_preds)?;

    let persistence = naive_persistence(&frame, split.test.row_times())?;
    let persistence_rmse = compute_metrics(&persistence, split.test.y(), None)?.rmse;
    let report = compute_metrics(&preds, split.test.y(), Some(persistence_rmse))?;

    println!("mae {}", sig6(report.mae));
    println!("mape {}", sig6(report.mape));
    println!("rmse {}", sig6(report.rmse));
    println!("r2 {}", sig6(report.r2));
    if let Some(fsi) = report.fsi {
        println!("fsi {}", sig6(fsi));
    }
    println!("n_hours {}", report.n_hours);
    Ok(())
}

fn cmd_benchmark(
    config: &Path,
    out: Option<PathBuf>,
    jobs: usize,
    quiet: bool,
) -> Result<(), CmdError> {
    let text = fs::read_to_string(config)
        .map_err(|e| data_err(format!("cannot read {}: {e}", config.display())))?;
    let cfg = parse_config(&text)?;
    let outcome = run_experiment(&cfg, jobs)?;
    let dir = out.unwrap_or_else(|| cfg.out_dir.clone());
    emit_report(&cfg, &outcome, &dir)?;
    if !quiet {
        println!(
            "cells: {} completed, {} skipped, {} failed",
            outcome.cells.len(),
            outcome.skips.len(),
            outcome.failures.len()
        );
        println!("report: {}", dir.display());
    }
    Ok(())
}

fn cmd_report(traces: &Path, out: Option<PathBuf>, quiet: bool) -> Result<(), CmdError> {
    let rows = parse_traces_csv(traces)?;
    let lines = recompute_results(&rows)?;
    let csv = results_csv_text(&lines);
    match out {
        Some(path) => {
            fs::write(&path, &csv)
                .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?;
            if !quiet {
                println!("wrote {}", path.display());
            }
        }
        None => print!("{csv}"),
    }
    Ok(())
}
