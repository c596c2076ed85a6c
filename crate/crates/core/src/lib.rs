//! Day-ahead electricity-market price forecasting benchmark.
//!
//! The pipeline mirrors how short-history day-ahead forecasts are produced in
//! practice: ingest an hourly price/exogenous CSV, repair gaps, scale, reshape
//! into 24-hour supervised rows, split a calendar month into a training window
//! and a held-out tail, fit a model, and score it against the naive
//! same-hour-yesterday baseline.
//!
//! Model families live in [`boost`] (three gradient-boosted tree variants
//! built from their defining equations) and [`lstm`] (an LSTM with a feedback
//! error-correction head). [`bench`] runs the full market x window x model x
//! month grid deterministically and emits plot-ready reports.

pub mod bench;
pub mod boost;
pub mod data;
pub mod lstm;
pub mod metrics;
pub mod model_io;
pub mod numfmt;
pub mod tree;
