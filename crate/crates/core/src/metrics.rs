//! Scoring: MAE, MAPE, RMSE, R-squared, and the forecast skill index (FSI)
//! against the naive same-hour-yesterday baseline.
//!
//! FSI = 1 - RMSE_model / RMSE_naive: positive means the model beats
//! persistence, zero means it matches it, negative means persistence wins.

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use crate::data::{TimeSeriesFrame, PRICE_COL};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("predictions and actuals differ in length: {predictions} vs {actuals}")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("no hours to score")]
    EmptyInput,
    #[error("actuals are constant; R-squared is undefined")]
    ConstantActualsForR2,
    #[error("persistence RMSE is zero; FSI is undefined")]
    ZeroPersistenceRmse,
    #[error("no price history 24h before {0}")]
    HistoryUnavailable(DateTime<Utc>),
}

/// One flat record per scored (market, window, model) group.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mae: f64,
    /// Percent. NaN when every hour was excluded for a zero actual.
    pub mape: f64,
    pub rmse: f64,
    pub r2: f64,
    /// Present only when a persistence run exists for the identical hours.
    pub fsi: Option<f64>,
    pub n_hours: usize,
    /// Hours dropped from MAPE because the actual was exactly zero.
    pub n_mape_excluded: usize,
}

/// Score predictions against actuals. `persistence_rmse`, when given, must
/// come from the naive baseline evaluated on these same hours.
pub fn compute_metrics(
    predictions: &[f64],
    actuals: &[f64],
    persistence_rmse: Option<f64>,
) -> Result<MetricsReport, MetricsError> {
    if predictions.len() != actuals.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    if actuals.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = actuals.len() as f64;

    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut excluded = 0usize;
    let mut actual_sum = 0.0;
    for (&p, &a) in predictions.iter().zip(actuals) {
        let e = p - a;
        abs_sum += e.abs();
        sq_sum += e * e;
        if a == 0.0 {
            excluded += 1;
        } else {
            ape_sum += e.abs() / a;
        }
        actual_sum += a;
    }
    let mae = abs_sum / n;
    let rmse = (sq_sum / n).sqrt();
    let included = actuals.len() - excluded;
    let mape = if included == 0 {
        f64::NAN
    } else {
        100.0 * ape_sum / included as f64
    };

    // Plain forward sums keep R-squared of the constant-mean predictor at
    // exactly zero: numerator and denominator become the same expression.
    let mean = actual_sum / n;
    let mut ss_tot = 0.0;
    for &a in actuals {
        let d = mean - a;
        ss_tot += d * d;
    }
    if ss_tot == 0.0 {
        return Err(MetricsError::ConstantActualsForR2);
    }
    let r2 = 1.0 - sq_sum / ss_tot;

    let fsi = match persistence_rmse {
        Some(p) => Some(fsi(rmse, p)?),
        None => None,
    };

    Ok(MetricsReport {
        mae,
        mape,
        rmse,
        r2,
        fsi,
        n_hours: actuals.len(),
        n_mape_excluded: excluded,
    })
}

/// Forecast skill index of a model RMSE against the persistence RMSE.
pub fn fsi(model_rmse: f64, persistence_rmse: f64) -> Result<f64, MetricsError> {
    if persistence_rmse == 0.0 {
        return Err(MetricsError::ZeroPersistenceRmse);
    }
    Ok(1.0 - model_rmse / persistence_rmse)
}

/// Naive baseline: predict each hour with the actual price 24 hours earlier.
pub fn naive_persistence(
    frame: &TimeSeriesFrame,
    test_times: &[DateTime<Utc>],
) -> Result<Vec<f64>, MetricsError> {
    let price = frame.column(PRICE_COL).expect("frame has a price column");
    let mask = frame.missing_mask(PRICE_COL).unwrap();
    test_times
        .iter()
        .map(|&t| {
            let yesterday = t - Duration::hours(24);
            match frame.index_of(yesterday) {
                Some(i) if !mask[i] => Ok(price[i]),
                _ => Err(MetricsError::HistoryUnavailable(t)),
            }
        })
        .collect()
}
