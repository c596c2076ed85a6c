//! Grid execution: prepare each market once, then run every (market,
//! window, model, month) cell through split → scale → train → predict →
//! invert, in parallel, with order-independent seeding.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use rayon::prelude::*;

use super::{BenchError, ExperimentConfig, ModelKind, Overrides};
use crate::boost::{
    boost_fit, preset_leafwise_histogram, preset_levelwise_exact, preset_oblivious_ordered,
    BoostConfig, Ensemble, Variant,
};
use crate::data::{
    apply_scaler, fit_scaler, ingest_csv, interpolate_missing, invert_scaler, shift_timesteps,
    split_monthly, CsvSchema, ScalerParams, SupervisedDataset, TimeSeriesFrame,
};
use crate::lstm::{train_lstm_ffec, LstmFfecModel, TrainConfig};
use crate::metrics::naive_persistence;

/// Shared MinMax interval for features and target.
pub const SCALE_BOUNDS: (f64, f64) = (0.0, 1.0);
/// Price history fed to every model as lag features.
pub const N_LAGS: usize = 24;

/// One completed grid cell: raw-scale predictions over its test hours.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub market: String,
    pub window: u32,
    pub model: ModelKind,
    pub year: i32,
    pub month: u32,
    pub times: Vec<DateTime<Utc>>,
    pub actuals: Vec<f64>,
    pub preds: Vec<f64>,
}

/// A cell that produced no predictions, with the reason.
#[derive(Debug, Clone)]
pub struct CellNote {
    pub market: String,
    pub window: u32,
    pub model: ModelKind,
    pub year: i32,
    pub month: u32,
    pub reason: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    /// Canonical order: market, window, model name, year, month.
    pub cells: Vec<CellResult>,
    /// Infeasible cells (window/month does not fit the data).
    pub skips: Vec<CellNote>,
    /// Cells whose model errored; these do not abort the run.
    pub failures: Vec<CellNote>,
}

impl ExperimentOutcome {
    pub fn total_cells(&self) -> usize {
        self.cells.len() + self.skips.len() + self.failures.len()
    }
}

/// Seed for one grid cell, mixed from the run seed and the cell coordinates
/// with FNV-1a so results never depend on scheduling order.
pub fn cell_seed(
    run_seed: u64,
    market: &str,
    window: u32,
    model: &str,
    year: i32,
    month: u32,
) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let eat = |h: &mut u64, bytes: &[u8]| {
        for &b in bytes {
            *h ^= b as u64;
            *h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&mut h, &run_seed.to_le_bytes());
    eat(&mut h, market.as_bytes());
    eat(&mut h, &[0xff]);
    eat(&mut h, &window.to_le_bytes());
    eat(&mut h, model.as_bytes());
    eat(&mut h, &[0xff]);
    eat(&mut h, &year.to_le_bytes());
    eat(&mut h, &month.to_le_bytes());
    h
}

/// Fit the cell scaler on the training rows: one column per feature, the
/// target last.
pub fn dataset_scaler(train: &SupervisedDataset) -> Result<ScalerParams, BenchError> {
    let mut cols: Vec<Vec<f64>> = (0..train.n_features())
        .map(|j| train.feature_column(j))
        .collect();
    cols.push(train.y().to_vec());
    Ok(fit_scaler(&cols, SCALE_BOUNDS)?)
}

/// Rebuild a dataset with every feature column and the target mapped through
/// the scaler.
pub fn scale_dataset(
    ds: &SupervisedDataset,
    params: &ScalerParams,
) -> Result<SupervisedDataset, BenchError> {
    let mut cols: Vec<Vec<f64>> = (0..ds.n_features())
        .map(|j| ds.feature_column(j))
        .collect();
    cols.push(ds.y().to_vec());
    let scaled = apply_scaler(params, &cols)?;
    let n = ds.n_rows();
    let n_features = ds.n_features();
    let mut x = vec![0.0; n * n_features];
    for (j, col) in scaled[..n_features].iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            x[i * n_features + j] = v;
        }
    }
    Ok(ds.with_values(x, scaled[n_features].clone()))
}

/// Map scaled model outputs back to prices via the scaler's target column.
pub fn invert_predictions(
    params: &ScalerParams,
    scaled_preds: &[f64],
) -> Result<Vec<f64>, BenchError> {
    let y_col = params.n_columns() - 1;
    let single = ScalerParams {
        mins: vec![params.mins[y_col]],
        maxs: vec![params.maxs[y_col]],
        low: params.low,
        up: params.up,
    };
    let cols = invert_scaler(&single, &[scaled_preds.to_vec()])?;
    Ok(cols.into_iter().next().unwrap())
}

/// A model fitted on one training split, ready to score scaled rows.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Ensemble(Ensemble),
    Lstm(LstmFfecModel),
}

impl TrainedModel {
    pub fn predict(&self, ds: &SupervisedDataset) -> Result<Vec<f64>, BenchError> {
        match self {
            TrainedModel::Ensemble(e) => Ok(e.predict_dataset(ds)?),
            TrainedModel::Lstm(m) => Ok(m.predict_dataset(ds)?),
        }
    }
}

fn boost_config_with(mut cfg: BoostConfig, o: &Overrides, seed: u64) -> BoostConfig {
    cfg.seed = seed;
    if let Some(t) = o.trees {
        cfg.n_trees = t;
    }
    if let Some(d) = o.max_depth {
        cfg.max_depth = d;
    }
    if let Some(lr) = o.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(s) = o.subsample {
        cfg.subsample = s;
    }
    cfg
}

fn lstm_config_with(o: &Overrides, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let l = &o.lstm;
    if let Some(u) = l.units {
        cfg.units = u;
    }
    if let Some(e) = l.epochs_stage1 {
        cfg.epochs_stage1 = e;
    }
    if let Some(e) = l.epochs_stage2 {
        cfg.epochs_stage2 = e;
    }
    if let Some(b) = l.batch {
        cfg.batch = b;
    }
    if let Some(r) = l.learning_rate {
        cfg.learning_rate = r;
    }
    if let Some(d) = l.dropout {
        cfg.dropout = d;
    }
    cfg
}

/// Train one model on an already-scaled training split. The naive model
/// never reaches here; it reads actual prices instead of training.
pub fn train_cell_model(
    model: ModelKind,
    train_scaled: &SupervisedDataset,
    overrides: &Overrides,
    seed: u64,
) -> Result<TrainedModel, BenchError> {
    match model {
        ModelKind::Naive => unreachable!("naive model has no training step"),
        ModelKind::LstmFfec => {
            let cfg = lstm_config_with(overrides, seed);
            Ok(TrainedModel::Lstm(train_lstm_ffec(train_scaled, &cfg)?))
        }
        ModelKind::Boosted(variant) => {
            let fitted = match variant {
                Variant::LevelwiseExact => {
                    let (cfg, mut learner) = preset_levelwise_exact(seed);
                    boost_fit(
                        train_scaled,
                        &boost_config_with(cfg, overrides, seed),
                        &mut learner,
                    )?
                }
                Variant::LeafwiseHistogram => {
                    let (cfg, mut learner) = preset_leafwise_histogram(seed);
                    boost_fit(
                        train_scaled,
                        &boost_config_with(cfg, overrides, seed),
                        &mut learner,
                    )?
                }
                Variant::ObliviousOrdered => {
                    let (cfg, mut learner) = preset_oblivious_ordered(seed);
                    boost_fit(
                        train_scaled,
                        &boost_config_with(cfg, overrides, seed),
                        &mut learner,
                    )?
                }
            };
            Ok(TrainedModel::Ensemble(fitted))
        }
    }
}

struct PreparedMarket {
    name: String,
    frame: TimeSeriesFrame,
    dataset: SupervisedDataset,
}

/// Ingest, interpolate and lag-shift every market once.
fn prepare_markets(cfg: &ExperimentConfig) -> Result<Vec<Arc<PreparedMarket>>, BenchError> {
    cfg.markets
        .iter()
        .map(|m| {
            let raw = ingest_csv(&m.path, &CsvSchema::default())?;
            let frame = interpolate_missing(&raw)?;
            let dataset = shift_timesteps(&frame, N_LAGS)?;
            Ok(Arc::new(PreparedMarket {
                name: m.name.clone(),
                frame,
                dataset,
            }))
        })
        .collect()
}

enum CellOutcome {
    Done(CellResult),
    Skip(CellNote),
    Fail(CellNote),
}

fn run_cell(
    market: &PreparedMarket,
    window: u32,
    model: ModelKind,
    year: i32,
    month: u32,
    cfg: &ExperimentConfig,
) -> CellOutcome {
    let note = |reason: String| CellNote {
        market: market.name.clone(),
        window,
        model,
        year,
        month,
        reason,
    };
    let split = match split_monthly(&market.dataset, window, year, month) {
        Ok(s) => s,
        Err(e) => return CellOutcome::Skip(note(e.to_string())),
    };
    let times = split.test.row_times().to_vec();
    let actuals = split.test.y().to_vec();

    let preds = if model == ModelKind::Naive {
        match naive_persistence(&market.frame, &times) {
            Ok(p) => p,
            Err(e) => return CellOutcome::Fail(note(e.to_string())),
        }
    } else {
        let seed = cell_seed(cfg.seed, &market.name, window, model.name(), year, month);
        let run = || -> Result<Vec<f64>, BenchError> {
            let scaler = dataset_scaler(&split.train)?;
            let train_scaled = scale_dataset(&split.train, &scaler)?;
            let test_scaled = scale_dataset(&split.test, &scaler)?;
            let fitted = train_cell_model(model, &train_scaled, &cfg.overrides, seed)?;
            invert_predictions(&scaler, &fitted.predict(&test_scaled)?)
        };
        match run() {
            Ok(p) => p,
            Err(e) => return CellOutcome::Fail(note(e.to_string())),
        }
    };

    CellOutcome::Done(CellResult {
        market: market.name.clone(),
        window,
        model,
        year,
        month,
        times,
        actuals,
        preds,
    })
}

/// Execute the whole grid. `jobs` caps rayon workers; 0 means the rayon
/// default. Output is identical for every jobs value: cells are seeded by
/// coordinates and sorted canonically afterwards.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<ExperimentOutcome, BenchError> {
    let markets = prepare_markets(cfg)?;

    let mut tasks = Vec::with_capacity(cfg.grid_size());
    for market in &markets {
        for &window in &cfg.windows {
            for &model in &cfg.models {
                for &(year, month) in &cfg.months {
                    tasks.push((Arc::clone(market), window, model, year, month));
                }
            }
        }
    }

    let run_all = || {
        tasks
            .par_iter()
            .map(|(market, window, model, year, month)| {
                run_cell(market, *window, *model, *year, *month, cfg)
            })
            .collect::<Vec<_>>()
    };
    let outcomes = if jobs == 0 {
        run_all()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("worker pool");
        pool.install(run_all)
    };

    let mut cells = Vec::new();
    let mut skips = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            CellOutcome::Done(c) => cells.push(c),
            CellOutcome::Skip(n) => skips.push(n),
            CellOutcome::Fail(n) => failures.push(n),
        }
    }
    let key = |m: &str, w: u32, k: ModelKind, y: i32, mo: u32| {
        (m.to_string(), w, k.name().to_string(), y, mo)
    };
    cells.sort_by_key(|c| key(&c.market, c.window, c.model, c.year, c.month));
    skips.sort_by_key(|n| key(&n.market, n.window, n.model, n.year, n.month));
    failures.sort_by_key(|n| key(&n.market, n.window, n.model, n.year, n.month));

    if cells.is_empty() {
        return Err(BenchError::NoFeasibleCells);
    }
    Ok(ExperimentOutcome {
        cells,
        skips,
        failures,
    })
}
