//! Experiment grid orchestration: (market × window × model × month) cells,
//! each trained on its own monthly split and pooled into per-(market,
//! window, model) metrics, seasonal and peak/valley breakdowns, and a
//! reproducible report directory.
//!
//! Cells are independent and may run concurrently; every cell derives its
//! own RNG seed from the run seed and the cell coordinates, so results do
//! not depend on execution order or worker count. The naive persistence
//! model anchors the forecast skill index: FSI appears in a report exactly
//! when the naive model ran on the identical pooled test hours.

mod config;
mod report;
mod run;

pub use config::{parse_config, ExperimentConfig, LstmOverrides, MarketSpec, Overrides};
pub use report::{
    aggregate_results, emit_report, metric_lines, parse_results_csv, parse_traces_csv,
    peak_valley_analysis, recompute_results, results_csv_text, seasonal_breakdown, trace_rows,
    AggregateRow, MetricLine, PeakValleyRow, SeasonRow, TraceRow, SEASONS,
};
pub use run::{
    cell_seed, dataset_scaler, invert_predictions, run_experiment, scale_dataset,
    train_cell_model, CellNote, CellResult, ExperimentOutcome, TrainedModel,
};

use thiserror::Error;

use crate::boost::{BoostError, Variant};
use crate::data::DataError;
use crate::lstm::LstmError;
use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no grid cell completed")]
    NoFeasibleCells,
    #[error("cannot write report: {0}")]
    OutputUnwritable(std::io::Error),
    #[error("{file} line {line}: {msg}")]
    MalformedReportFile {
        file: String,
        line: usize,
        msg: String,
    },
}

/// A forecasting model the grid can run. Canonical report order is
/// alphabetical by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Naive,
    LstmFfec,
    Boosted(Variant),
}

pub const MODEL_NAMES: [&str; 5] = [
    "naive",
    "lstm_ffec",
    "levelwise_exact",
    "leafwise_histogram",
    "oblivious_ordered",
];

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::LstmFfec => "lstm_ffec",
            ModelKind::Boosted(v) => v.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<ModelKind> {
        match name {
            "naive" => Some(ModelKind::Naive),
            "lstm_ffec" => Some(ModelKind::LstmFfec),
            other => Variant::from_name(other).map(ModelKind::Boosted),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for name in MODEL_NAMES {
            assert_eq!(ModelKind::from_name(name).unwrap().name(), name);
        }
        assert!(ModelKind::from_name("catboost").is_none());
    }
}
