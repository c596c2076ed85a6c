//! Time-step shifting: one supervised row per target hour.
//!
//! A row for hour t carries the n previous prices (oldest first), every
//! exogenous forecast at t itself (day-ahead forecasts are known in advance),
//! and hour-of-day / day-of-week slots that the categorical-aware learner can
//! treat as categories.

use chrono::{DateTime, Datelike, Timelike, Utc};

use super::{DataError, TimeSeriesFrame, PRICE_COL};

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    x: Vec<f64>, // row-major
    y: Vec<f64>,
    n_features: usize,
    n_lags: usize,
    feature_names: Vec<String>,
    categorical_slots: Vec<usize>,
    row_times: Vec<DateTime<Utc>>,
}

impl SupervisedDataset {
    pub fn from_parts(
        x: Vec<f64>,
        y: Vec<f64>,
        n_features: usize,
        n_lags: usize,
        feature_names: Vec<String>,
        categorical_slots: Vec<usize>,
        row_times: Vec<DateTime<Utc>>,
    ) -> Self {
        assert_eq!(x.len(), y.len() * n_features);
        assert_eq!(y.len(), row_times.len());
        assert_eq!(feature_names.len(), n_features);
        SupervisedDataset {
            x,
            y,
            n_features,
            n_lags,
            feature_names,
            categorical_slots,
            row_times,
        }
    }

    /// Plain numeric rows with generated names, no lags, no categorical
    /// slots and synthetic hourly timestamps. Convenient for fitting on data
    /// that never came from a time series.
    pub fn from_numeric(x: Vec<f64>, y: Vec<f64>, n_features: usize) -> Self {
        let names = (0..n_features).map(|j| format!("f{j}")).collect();
        let epoch = DateTime::<Utc>::from_timestamp(0, 0).expect("epoch");
        let times = (0..y.len() as i64)
            .map(|i| epoch + chrono::Duration::hours(i))
            .collect();
        Self::from_parts(x, y, n_features, 0, names, Vec::new(), times)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Count of leading lag slots (the price history portion of each row).
    pub fn n_lags(&self) -> usize {
        self.n_lags
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn categorical_slots(&self) -> &[usize] {
        &self.categorical_slots
    }

    pub fn row_times(&self) -> &[DateTime<Utc>] {
        &self.row_times
    }

    /// Feature column j gathered across rows.
    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    /// Copy out a contiguous row range.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> SupervisedDataset {
        SupervisedDataset {
            x: self.x[range.start * self.n_features..range.end * self.n_features].to_vec(),
            y: self.y[range.clone()].to_vec(),
            n_features: self.n_features,
            n_lags: self.n_lags,
            feature_names: self.feature_names.clone(),
            categorical_slots: self.categorical_slots.clone(),
            row_times: self.row_times[range].to_vec(),
        }
    }

    /// Same rows with x and y replaced (used by the scaling step).
    pub fn with_values(&self, x: Vec<f64>, y: Vec<f64>) -> SupervisedDataset {
        assert_eq!(x.len(), self.x.len());
        assert_eq!(y.len(), self.y.len());
        SupervisedDataset {
            x,
            y,
            ..self.clone()
        }
    }
}

/// Reshape a complete frame into supervised rows with price lag n.
pub fn shift_timesteps(frame: &TimeSeriesFrame, n: usize) -> Result<SupervisedDataset, DataError> {
    assert!(n >= 1, "lag must be positive");
    let price = frame
        .column(PRICE_COL)
        .ok_or_else(|| DataError::UnknownColumn(PRICE_COL.into()))?;
    if frame.has_missing() {
        return Err(DataError::MissingCells);
    }
    let total = frame.n_hours();
    if total <= n {
        return Err(DataError::FrameTooShort { lag: n, have: total });
    }

    let exog: Vec<&str> = frame
        .column_names()
        .iter()
        .filter(|c| c.as_str() != PRICE_COL)
        .map(|c| c.as_str())
        .collect();
    let exog_cols: Vec<&[f64]> = exog.iter().map(|c| frame.column(c).unwrap()).collect();

    let mut feature_names: Vec<String> = (0..n).map(|j| format!("price_lag_{}", n - j)).collect();
    feature_names.extend(exog.iter().map(|c| c.to_string()));
    feature_names.push("hour_of_day".into());
    feature_names.push("day_of_week".into());
    let n_features = feature_names.len();
    let categorical_slots = vec![n_features - 2, n_features - 1];

    let n_rows = total - n;
    let mut x = Vec::with_capacity(n_rows * n_features);
    let mut y = Vec::with_capacity(n_rows);
    let mut row_times = Vec::with_capacity(n_rows);
    for t in n..total {
        x.extend_from_slice(&price[t - n..t]);
        for col in &exog_cols {
            x.push(col[t]);
        }
        let ts = frame.time_at(t);
        x.push(ts.hour() as f64);
        x.push(ts.weekday().num_days_from_monday() as f64);
        y.push(price[t]);
        row_times.push(ts);
    }

    Ok(SupervisedDataset {
        x,
        y,
        n_features,
        n_lags: n,
        feature_names,
        categorical_slots,
        row_times,
    })
}
