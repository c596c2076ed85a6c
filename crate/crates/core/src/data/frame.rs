//! The hourly UTC grid all ingested data lands on.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, Timelike, Utc};

use super::{DataError, CANONICAL_COLUMNS};

/// A contiguous hourly grid of named series with per-cell missing flags.
///
/// Hours absent from the source file exist on the grid as missing cells, so
/// downstream code never has to reason about gaps in time, only gaps in data.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    start: DateTime<Utc>,
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    missing: Vec<Vec<bool>>,
}

impl TimeSeriesFrame {
    /// Build a frame with no missing cells. All columns must share a length.
    pub fn from_columns(start: DateTime<Utc>, cols: Vec<(&str, Vec<f64>)>) -> Self {
        let masked = cols
            .into_iter()
            .map(|(n, v)| {
                let mask = vec![false; v.len()];
                (n, v, mask)
            })
            .collect();
        Self::from_columns_masked(start, masked)
    }

    /// Build a frame with explicit missing masks (true = missing).
    pub fn from_columns_masked(
        start: DateTime<Utc>,
        cols: Vec<(&str, Vec<f64>, Vec<bool>)>,
    ) -> Self {
        assert!(!cols.is_empty(), "frame needs at least one column");
        let len = cols[0].1.len();
        for (n, v, m) in &cols {
            assert_eq!(v.len(), len, "column {n} length");
            assert_eq!(m.len(), len, "column {n} mask length");
        }
        TimeSeriesFrame {
            start,
            names: cols.iter().map(|(n, _, _)| n.to_string()).collect(),
            values: cols.iter().map(|(_, v, _)| v.clone()).collect(),
            missing: cols.into_iter().map(|(_, _, m)| m).collect(),
        }
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn n_hours(&self) -> usize {
        self.values.first().map_or(0, |c| c.len())
    }

    pub fn time_at(&self, idx: usize) -> DateTime<Utc> {
        self.start + Duration::hours(idx as i64)
    }

    /// Grid index of a timestamp, if it lies on the grid.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let delta = ts - self.start;
        if delta.num_minutes() % 60 != 0 {
            return None;
        }
        let hours = delta.num_hours();
        if hours < 0 || hours as usize >= self.n_hours() {
            return None;
        }
        Some(hours as usize)
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    fn col_idx(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.col_idx(name).map(|i| self.values[i].as_slice())
    }

    pub fn missing_mask(&self, name: &str) -> Option<&[bool]> {
        self.col_idx(name).map(|i| self.missing[i].as_slice())
    }

    pub fn missing_count(&self, name: &str) -> usize {
        self.missing_mask(name)
            .map_or(0, |m| m.iter().filter(|&&x| x).count())
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|m| m.iter().any(|&x| x))
    }

    pub(super) fn columns_mut(&mut self) -> (&[String], &mut Vec<Vec<f64>>, &mut Vec<Vec<bool>>) {
        (&self.names, &mut self.values, &mut self.missing)
    }
}

/// Maps CSV header names onto frame column names. The timestamp column is
/// named separately; every `(csv, frame)` pair must resolve in the header.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub timestamp: String,
    pub columns: Vec<(String, String)>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp: "timestamp".into(),
            columns: CANONICAL_COLUMNS
                .iter()
                .map(|c| (c.to_string(), c.to_string()))
                .collect(),
        }
    }
}

fn parse_hour_utc(text: &str, row: usize) -> Result<DateTime<Utc>, DataError> {
    let bad = || DataError::BadTimestamp {
        row,
        text: text.to_string(),
    };
    let ts = DateTime::parse_from_rfc3339(text.trim())
        .map_err(|_| bad())?
        .with_timezone(&Utc);
    if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(bad());
    }
    Ok(ts)
}

/// Read an hourly CSV onto the grid. Empty fields become missing cells;
/// hours absent between the first and last timestamp become missing rows.
/// Duplicate timestamps are rejected rather than averaged.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<TimeSeriesFrame, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::FileUnreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let header_pos = |name: &str| headers.iter().position(|h| h == name);
    let ts_idx = header_pos(&schema.timestamp)
        .ok_or_else(|| DataError::UnknownColumn(schema.timestamp.clone()))?;
    let mut col_idx = Vec::with_capacity(schema.columns.len());
    for (csv_name, _) in &schema.columns {
        col_idx
            .push(header_pos(csv_name).ok_or_else(|| DataError::UnknownColumn(csv_name.clone()))?);
    }

    // ts -> one Option per schema column; BTreeMap gives chronological order
    // regardless of file order.
    let mut rows: BTreeMap<DateTime<Utc>, Vec<Option<f64>>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2; // 1-based, after the header line
        let ts = parse_hour_utc(record.get(ts_idx).unwrap_or(""), row)?;
        let mut vals = Vec::with_capacity(col_idx.len());
        for (&idx, (csv_name, _)) in col_idx.iter().zip(&schema.columns) {
            let field = record.get(idx).unwrap_or("");
            if field.is_empty() {
                vals.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| DataError::BadNumber {
                    row,
                    column: csv_name.clone(),
                    text: field.to_string(),
                })?;
                vals.push(Some(v));
            }
        }
        if rows.insert(ts, vals).is_some() {
            return Err(DataError::DuplicateTimestamp(ts));
        }
    }

    let (&first, _) = rows.iter().next().ok_or(DataError::EmptyFile)?;
    let (&last, _) = rows.iter().next_back().unwrap();
    let n_hours = ((last - first).num_hours() + 1) as usize;

    let n_cols = schema.columns.len();
    let mut values = vec![vec![f64::NAN; n_hours]; n_cols];
    let mut missing = vec![vec![true; n_hours]; n_cols];
    for (ts, vals) in rows {
        let idx = ((ts - first).num_hours()) as usize;
        for (c, v) in vals.into_iter().enumerate() {
            if let Some(v) = v {
                values[c][idx] = v;
                missing[c][idx] = false;
            }
        }
    }

    Ok(TimeSeriesFrame {
        start: first,
        names: schema.columns.iter().map(|(_, f)| f.clone()).collect(),
        values,
        missing,
    })
}

/// Write a frame back out in the canonical CSV layout (full float precision,
/// missing cells as empty fields).
pub fn write_frame_csv(frame: &TimeSeriesFrame, path: &Path) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|source| {
        DataError::FileUnreadable {
            path: path.display().to_string(),
            source,
        }
    })?);
    let io_err = |source: std::io::Error| DataError::FileUnreadable {
        path: path.display().to_string(),
        source,
    };
    let mut header = vec!["timestamp".to_string()];
    header.extend(frame.names.iter().cloned());
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for i in 0..frame.n_hours() {
        let mut fields = vec![frame.time_at(i).format("%Y-%m-%dT%H:%M:%SZ").to_string()];
        for c in 0..frame.names.len() {
            if frame.missing[c][i] {
                fields.push(String::new());
            } else {
                fields.push(format!("{}", frame.values[c][i]));
            }
        }
        writeln!(out, "{}", fields.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Fill missing cells: linear interpolation across interior gaps, nearest
/// observed value at the edges. Each column needs at least two observations.
pub fn interpolate_missing(frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame, DataError> {
    let mut repaired = frame.clone();
    let (names, values, missing) = repaired.columns_mut();
    for ((name, col), mask) in names.iter().zip(values.iter_mut()).zip(missing.iter_mut()) {
        let observed: Vec<usize> = (0..col.len()).filter(|&i| !mask[i]).collect();
        if observed.is_empty() {
            return Err(DataError::ColumnAllMissing(name.clone()));
        }
        if observed.len() == 1 {
            return Err(DataError::ColumnTooSparse(name.clone()));
        }
        for i in 0..*observed.first().unwrap() {
            col[i] = col[observed[0]];
        }
        for w in observed.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (a, b) = (col[lo], col[hi]);
            for i in lo + 1..hi {
                let t = (i - lo) as f64 / (hi - lo) as f64;
                col[i] = a + (b - a) * t;
            }
        }
        for i in *observed.last().unwrap() + 1..col.len() {
            col[i] = col[observed[observed.len() - 1]];
        }
        mask.fill(false);
    }
    Ok(repaired)
}
