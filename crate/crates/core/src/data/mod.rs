//! Hourly market data: ingest, repair, scaling, supervised reshaping,
//! chronological splits, and a synthetic generator for self-contained runs.

mod frame;
mod scaler;
mod split;
mod supervised;
mod synthetic;

pub use frame::{ingest_csv, interpolate_missing, write_frame_csv, CsvSchema, TimeSeriesFrame};
pub use scaler::{apply_scaler, fit_scaler, invert_scaler, ScalerParams};
pub use split::{days_in_month, split_monthly, test_days_for, WindowSplit, WINDOW_CHOICES};
pub use supervised::{shift_timesteps, SupervisedDataset};
pub use synthetic::{gen_synthetic, SyntheticSpec};

use chrono::{DateTime, Utc};
use thiserror::Error;

/// Canonical price column name; the target of every model.
pub const PRICE_COL: &str = "price_eur_mwh";

/// Canonical input schema, in file order.
pub const CANONICAL_COLUMNS: [&str; 5] = [
    "price_eur_mwh",
    "load_fc_mw",
    "res_fc_mw",
    "gen_fc_mw",
    "netflow_fc_mw",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: bad timestamp {text:?} (want ISO-8601 UTC on a whole hour)")]
    BadTimestamp { row: usize, text: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(DateTime<Utc>),
    #[error("row {row}, column {column}: bad number {text:?}")]
    BadNumber {
        row: usize,
        column: String,
        text: String,
    },
    #[error("column {0} not found")]
    UnknownColumn(String),
    #[error("no data rows")]
    EmptyFile,
    #[error("column {0} has no observed values")]
    ColumnAllMissing(String),
    #[error("column {0} has fewer than two observed values; cannot interpolate")]
    ColumnTooSparse(String),
    #[error("empty column")]
    EmptyColumn,
    #[error("invalid scaling bounds ({0}, {1})")]
    InvalidBounds(f64, f64),
    #[error("constant column: scaling is not invertible")]
    DegenerateColumn,
    #[error("column count mismatch: params have {expected}, data has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("frame too short: {have} hours cannot support lag {lag}")]
    FrameTooShort { lag: usize, have: usize },
    #[error("frame has missing cells; interpolate before shifting")]
    MissingCells,
    #[error("{needed}-day window reaches before the data start; only {available} full days available")]
    InsufficientHistory { needed: u32, available: i64 },
    #[error("month {year}-{month:02} is not fully covered by the dataset")]
    MonthNotCovered { year: i32, month: u32 },
    #[error("window_days must be one of 7/14/30/45/60/90, got {0}")]
    InvalidWindow(u32),
    #[error("bad synthetic spec: {0}")]
    Config(String),
}
