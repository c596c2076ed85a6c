//! Chronological month splits: the last fifth of a calendar month (rounded
//! up to whole days) is held out, and the training window is the configured
//! number of consecutive days ending the hour before the first test hour.

use chrono::{DateTime, Duration, TimeZone, Utc};

use super::{DataError, SupervisedDataset};

/// Training window lengths the study sweeps.
pub const WINDOW_CHOICES: [u32; 6] = [7, 14, 30, 45, 60, 90];

#[derive(Debug, Clone)]
pub struct WindowSplit {
    pub window_days: u32,
    pub year: i32,
    pub month: u32,
    pub train: SupervisedDataset,
    pub test: SupervisedDataset,
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let first = Utc.with_ymd_and_hms(year, month, 1, 0, 0, 0).unwrap();
    let next = if month == 12 {
        Utc.with_ymd_and_hms(year + 1, 1, 1, 0, 0, 0).unwrap()
    } else {
        Utc.with_ymd_and_hms(year, month + 1, 1, 0, 0, 0).unwrap()
    };
    (next - first).num_days() as u32
}

/// Test days held out of a month: ceil(20% of its days).
pub fn test_days_for(year: i32, month: u32) -> u32 {
    days_in_month(year, month).div_ceil(5)
}

/// Cut one month into (train, test) over an hourly-contiguous dataset.
pub fn split_monthly(
    ds: &SupervisedDataset,
    window_days: u32,
    year: i32,
    month: u32,
) -> Result<WindowSplit, DataError> {
    if !WINDOW_CHOICES.contains(&window_days) {
        return Err(DataError::InvalidWindow(window_days));
    }
    if ds.n_rows() == 0 {
        return Err(DataError::MonthNotCovered { year, month });
    }

    let n_days = days_in_month(year, month);
    let test_days = test_days_for(year, month);
    let test_start = Utc
        .with_ymd_and_hms(year, month, n_days - test_days + 1, 0, 0, 0)
        .unwrap();
    let test_end = Utc.with_ymd_and_hms(year, month, n_days, 23, 0, 0).unwrap();
    let train_start = test_start - Duration::days(window_days as i64);

    let ds_start = ds.row_times()[0];
    let ds_end = *ds.row_times().last().unwrap();
    if test_start < ds_start || test_end > ds_end {
        return Err(DataError::MonthNotCovered { year, month });
    }
    if train_start < ds_start {
        let available = (test_start - ds_start).num_hours() / 24;
        return Err(DataError::InsufficientHistory {
            needed: window_days,
            available,
        });
    }

    let idx = |ts: DateTime<Utc>| ((ts - ds_start).num_hours()) as usize;
    let train = ds.slice_rows(idx(train_start)..idx(test_start));
    let test = ds.slice_rows(idx(test_start)..idx(test_end) + 1);
    debug_assert_eq!(train.n_rows() as i64, window_days as i64 * 24);
    debug_assert_eq!(test.n_rows() as i64, test_days as i64 * 24);

    Ok(WindowSplit {
        window_days,
        year,
        month,
        train,
        test,
    })
}
