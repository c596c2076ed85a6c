//! Pooled metrics and report emission.
//!
//! Every number in results.csv is computed from trace rows (hour, actual,
//! prediction), and the recomputation path used for report auditing runs the
//! same code over the emitted traces.csv, so the two agree whenever the
//! traces are faithful. Traces carry full-precision floats; tables render 6
//! significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Utc};

use super::{BenchError, ExperimentConfig, ExperimentOutcome, ModelKind};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::numfmt::sig6;

/// One emitted prediction record; the atom every report is derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub market: String,
    pub window: u32,
    pub model: String,
    pub time: DateTime<Utc>,
    pub actual: f64,
    pub prediction: f64,
}

/// Pooled metrics for one (market, window, model) group.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub market: String,
    pub window: u32,
    pub model: String,
    pub report: MetricsReport,
}

/// One results.csv line with its value already rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricLine {
    pub market: String,
    pub window: u32,
    pub model: String,
    pub metric: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonRow {
    pub season: &'static str,
    pub window: u32,
    pub model: String,
    pub mae: f64,
    pub hours: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakValleyRow {
    pub window: u32,
    pub model: String,
    pub peak_mae: f64,
    pub valley_mae: f64,
    pub days: usize,
    pub partial_excluded: usize,
}

/// Meteorological seasons; months partition exactly.
pub const SEASONS: [(&str, [u32; 3]); 4] = [
    ("winter", [12, 1, 2]),
    ("spring", [3, 4, 5]),
    ("summer", [6, 7, 8]),
    ("fall", [9, 10, 11]),
];

/// Flatten completed cells into trace rows. Cells arrive in canonical order,
/// so rows are sorted by (market, window, model, time).
pub fn trace_rows(outcome: &ExperimentOutcome) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for cell in &outcome.cells {
        for ((&t, &a), &p) in cell.times.iter().zip(&cell.actuals).zip(&cell.preds) {
            rows.push(TraceRow {
                market: cell.market.clone(),
                window: cell.window,
                model: cell.model.name().to_string(),
                time: t,
                actual: a,
                prediction: p,
            });
        }
    }
    rows
}

type GroupKey = (String, u32, String);

/// Pool trace rows per (market, window, model) and compute metrics. FSI is
/// attached exactly when the naive model covers the identical hours of the
/// same (market, window).
fn grouped_reports(traces: &[TraceRow]) -> Result<Vec<AggregateRow>, BenchError> {
    let mut sorted: Vec<&TraceRow> = traces.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.market, a.window, &a.model, a.time).cmp(&(&b.market, b.window, &b.model, b.time))
    });

    let mut groups: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>, Vec<DateTime<Utc>>)> = BTreeMap::new();
    for row in sorted {
        let entry = groups
            .entry((row.market.clone(), row.window, row.model.clone()))
            .or_default();
        entry.0.push(row.prediction);
        entry.1.push(row.actual);
        entry.2.push(row.time);
    }

    let mut naive_rmse: BTreeMap<(String, u32), (f64, Vec<DateTime<Utc>>)> = BTreeMap::new();
    for ((market, window, model), (preds, actuals, times)) in &groups {
        if model == ModelKind::Naive.name() {
            let report = compute_metrics(preds, actuals, None)?;
            naive_rmse.insert((market.clone(), *window), (report.rmse, times.clone()));
        }
    }

    groups
        .into_iter()
        .map(|((market, window, model), (preds, actuals, times))| {
            let persistence = naive_rmse
                .get(&(market.clone(), window))
                .filter(|(_, naive_times)| *naive_times == times)
                .map(|(rmse, _)| *rmse);
            let report = compute_metrics(&preds, &actuals, persistence)?;
            Ok(AggregateRow {
                market,
                window,
                model,
                report,
            })
        })
        .collect()
}

pub fn aggregate_results(outcome: &ExperimentOutcome) -> Result<Vec<AggregateRow>, BenchError> {
    grouped_reports(&trace_rows(outcome))
}

/// Error metrics render at 6 significant digits; counts stay integral.
fn render_lines(rows: &[AggregateRow]) -> Vec<MetricLine> {
    let mut lines = Vec::new();
    for row in rows {
        let mut push = |metric: &str, value: String| {
            lines.push(MetricLine {
                market: row.market.clone(),
                window: row.window,
                model: row.model.clone(),
                metric: metric.to_string(),
                value,
            });
        };
        let r = &row.report;
        push("mae", sig6(r.mae));
        push("mape", sig6(r.mape));
        push("rmse", sig6(r.rmse));
        push("r2", sig6(r.r2));
        if let Some(fsi) = r.fsi {
            push("fsi", sig6(fsi));
        }
        push("n_hours", r.n_hours.to_string());
        push("n_mape_excluded", r.n_mape_excluded.to_string());
    }
    lines
}

pub fn metric_lines(traces: &[TraceRow]) -> Result<Vec<MetricLine>, BenchError> {
    Ok(render_lines(&grouped_reports(traces)?))
}

/// The audit path: re-derive the results table from emitted traces.
pub fn recompute_results(traces: &[TraceRow]) -> Result<Vec<MetricLine>, BenchError> {
    metric_lines(traces)
}

/// MAE per (season, window, model) over hours pooled across markets and
/// months; empty seasons are omitted.
pub fn seasonal_breakdown(traces: &[TraceRow]) -> Vec<SeasonRow> {
    let mut buckets: BTreeMap<(usize, u32, String), (f64, usize)> = BTreeMap::new();
    for row in traces {
        let season_idx = SEASONS
            .iter()
            .position(|(_, m)| m.contains(&row.time.month()))
            .expect("month in 1..=12");
        let entry = buckets
            .entry((season_idx, row.window, row.model.clone()))
            .or_default();
        entry.0 += (row.actual - row.prediction).abs();
        entry.1 += 1;
    }
    buckets
        .into_iter()
        .map(|((season_idx, window, model), (abs_sum, hours))| SeasonRow {
            season: SEASONS[season_idx].0,
            window,
            model,
            mae: abs_sum / hours as f64,
            hours,
        })
        .collect()
}

/// MAE at each test day's actual peak and valley hours, per (window, model),
/// pooled across markets. Only days with all 24 hours traced are evaluated;
/// ties pick the earliest hour.
pub fn peak_valley_analysis(traces: &[TraceRow]) -> Vec<PeakValleyRow> {
    type DayKey = (u32, String, String, NaiveDate);
    let mut days: BTreeMap<DayKey, Vec<(u32, f64, f64)>> = BTreeMap::new();
    for row in traces {
        days.entry((
            row.window,
            row.model.clone(),
            row.market.clone(),
            row.time.date_naive(),
        ))
        .or_default()
        .push((row.time.hour(), row.actual, row.prediction));
    }

    let mut rollup: BTreeMap<(u32, String), (f64, f64, usize, usize)> = BTreeMap::new();
    for ((window, model, _market, _date), mut hours) in days {
        let entry = rollup.entry((window, model)).or_default();
        hours.sort_by_key(|(h, _, _)| *h);
        let complete =
            hours.len() == 24 && hours.iter().enumerate().all(|(i, (h, _, _))| *h == i as u32);
        if !complete {
            entry.3 += 1;
            continue;
        }
        let mut peak = 0usize;
        let mut valley = 0usize;
        for (i, (_, a, _)) in hours.iter().enumerate() {
            if *a > hours[peak].1 {
                peak = i;
            }
            if *a < hours[valley].1 {
                valley = i;
            }
        }
        entry.0 += (hours[peak].1 - hours[peak].2).abs();
        entry.1 += (hours[valley].1 - hours[valley].2).abs();
        entry.2 += 1;
    }

    rollup
        .into_iter()
        .filter(|(_, (_, _, days, _))| *days > 0)
        .map(
            |((window, model), (peak_sum, valley_sum, days, partial))| PeakValleyRow {
                window,
                model,
                peak_mae: peak_sum / days as f64,
                valley_mae: valley_sum / days as f64,
                days,
                partial_excluded: partial,
            },
        )
        .collect()
}

const RESULTS_HEADER: &str = "market,window_days,model,metric,value";
const TRACES_HEADER: &str = "market,window_days,model,timestamp,actual,prediction";
const TABLE_METRICS: [&str; 5] = ["mae", "mape", "rmse", "r2", "fsi"];

fn format_time(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn results_csv_text(lines: &[MetricLine]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for l in lines {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            l.market, l.window, l.model, l.metric, l.value
        );
    }
    out
}

fn traces_csv_text(traces: &[TraceRow]) -> String {
    let mut out = String::from(TRACES_HEADER);
    out.push('\n');
    for r in traces {
        let _ = writeln!(
            out,
            "{},{},{},{},{:?},{:?}",
            r.market,
            r.window,
            r.model,
            format_time(r.time),
            r.actual,
            r.prediction
        );
    }
    out
}

/// Wide Table-2-shaped grid: one row per (window, metric), one column per
/// (market, model); cells without a value stay empty.
fn results_table_text(rows: &[AggregateRow]) -> String {
    let mut columns: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r.market.clone(), r.model.clone()))
        .collect();
    columns.sort();
    columns.dedup();
    let mut windows: Vec<u32> = rows.iter().map(|r| r.window).collect();
    windows.sort_unstable();
    windows.dedup();

    let mut by_key: BTreeMap<(u32, &str, &str), &MetricsReport> = BTreeMap::new();
    for r in rows {
        by_key.insert((r.window, r.market.as_str(), r.model.as_str()), &r.report);
    }

    let mut out = String::from("window_days,metric");
    for (market, model) in &columns {
        let _ = write!(out, ",{market}/{model}");
    }
    out.push('\n');
    for &window in &windows {
        for metric in TABLE_METRICS {
            let _ = write!(out, "{window},{metric}");
            for (market, model) in &columns {
                out.push(',');
                if let Some(report) = by_key.get(&(window, market.as_str(), model.as_str())) {
                    let value = match metric {
                        "mae" => Some(report.mae),
                        "mape" => Some(report.mape),
                        "rmse" => Some(report.rmse),
                        "r2" => Some(report.r2),
                        "fsi" => report.fsi,
                        _ => unreachable!(),
                    };
                    if let Some(v) = value {
                        out.push_str(&sig6(v));
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

fn breakdowns_text(seasonal: &[SeasonRow], peaks: &[PeakValleyRow]) -> String {
    let mut out = String::from("seasonal mae (test hours pooled across markets and months)\n");
    let mut grouped: BTreeMap<(u32, &str), Vec<&SeasonRow>> = BTreeMap::new();
    for row in seasonal {
        grouped
            .entry((row.window, row.model.as_str()))
            .or_default()
            .push(row);
    }
    for ((window, model), rows) in &grouped {
        let _ = writeln!(out, "  window {window} model {model}");
        for season in SEASONS.map(|(name, _)| name) {
            if let Some(row) = rows.iter().find(|r| r.season == season) {
                let _ = writeln!(out, "    {season} {} hours {}", sig6(row.mae), row.hours);
            }
        }
    }

    out.push_str("peak/valley mae (per-day extremes of actual prices)\n");
    for row in peaks {
        let _ = writeln!(
            out,
            "  window {} model {} peak {} valley {} days {} partial_excluded {}",
            row.window,
            row.model,
            sig6(row.peak_mae),
            sig6(row.valley_mae),
            row.days,
            row.partial_excluded
        );
    }
    out
}

fn manifest_text(
    cfg: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    seasonal_rows: usize,
    peak_valley_rows: usize,
) -> String {
    let mut out = String::from("damcast benchmark manifest\n");
    let _ = writeln!(out, "version {}", env!("CARGO_PKG_VERSION"));
    out.push_str("config\n");
    for line in cfg.echo_lines() {
        let _ = writeln!(out, "  {line}");
    }
    out.push_str("notes\n");
    out.push_str("  aggregation: test hours pooled across months, not mean of monthly scores\n");
    out.push_str("  cell seeds derive from (run seed, market, window, model, month)\n");
    out.push_str("  fsi present only where the naive model covers the identical hours\n");
    out.push_str("  mape excludes zero actuals; exclusion counts are in results.csv\n");
    out.push_str("cells\n");
    let _ = writeln!(out, "  total {}", outcome.total_cells());
    let _ = writeln!(out, "  completed {}", outcome.cells.len());
    let _ = writeln!(out, "  skipped {}", outcome.skips.len());
    let _ = writeln!(out, "  failed {}", outcome.failures.len());
    let _ = writeln!(out, "  seasonal_rows {seasonal_rows}");
    let _ = writeln!(out, "  peak_valley_rows {peak_valley_rows}");
    for n in &outcome.skips {
        let _ = writeln!(
            out,
            "skip {} {} {} {:04}-{:02} {}",
            n.market,
            n.window,
            n.model.name(),
            n.year,
            n.month,
            n.reason
        );
    }
    for n in &outcome.failures {
        let _ = writeln!(
            out,
            "fail {} {} {} {:04}-{:02} {}",
            n.market,
            n.window,
            n.model.name(),
            n.year,
            n.month,
            n.reason
        );
    }
    out
}

/// Write the full report directory: results.csv, results_table.csv,
/// traces.csv, breakdowns.txt, manifest.txt. `dir` may differ from the
/// configured out directory (a CLI override); the manifest echoes the
/// config as parsed either way, so directory contents do not depend on
/// where they land.
pub fn emit_report(
    cfg: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    dir: &Path,
) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(BenchError::OutputUnwritable)?;
    let traces = trace_rows(outcome);
    let aggregates = grouped_reports(&traces)?;
    let seasonal = seasonal_breakdown(&traces);
    let peaks = peak_valley_analysis(&traces);

    let write = |name: &str, text: String| {
        fs::write(dir.join(name), text).map_err(BenchError::OutputUnwritable)
    };
    write("results.csv", results_csv_text(&render_lines(&aggregates)))?;
    write("results_table.csv", results_table_text(&aggregates))?;
    write("traces.csv", traces_csv_text(&traces))?;
    write("breakdowns.txt", breakdowns_text(&seasonal, &peaks))?;
    write(
        "manifest.txt",
        manifest_text(cfg, outcome, seasonal.len(), peaks.len()),
    )?;
    Ok(())
}

fn file_err(file: &Path, line: usize, msg: String) -> BenchError {
    BenchError::MalformedReportFile {
        file: file.display().to_string(),
        line,
        msg,
    }
}

pub fn parse_traces_csv(path: &Path) -> Result<Vec<TraceRow>, BenchError> {
    let text = fs::read_to_string(path).map_err(BenchError::OutputUnwritable)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACES_HEADER => {}
        _ => return Err(file_err(path, 1, format!("expected header {TRACES_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(file_err(path, line_no, "expected 6 fields".into()));
        }
        let bad = |what: &str| file_err(path, line_no, format!("bad {what}"));
        rows.push(TraceRow {
            market: fields[0].to_string(),
            window: fields[1].parse().map_err(|_| bad("window"))?,
            model: fields[2].to_string(),
            time: DateTime::parse_from_rfc3339(fields[3])
                .map_err(|_| bad("timestamp"))?
                .with_timezone(&Utc),
            actual: fields[4].parse().map_err(|_| bad("actual"))?,
            prediction: fields[5].parse().map_err(|_| bad("prediction"))?,
        });
    }
    Ok(rows)
}

pub fn parse_results_csv(path: &Path) -> Result<Vec<MetricLine>, BenchError> {
    let text = fs::read_to_string(path).map_err(BenchError::OutputUnwritable)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        _ => {
            return Err(file_err(
                path,
                1,
                format!("expected header {RESULTS_HEADER:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(file_err(path, line_no, "expected 5 fields".into()));
        }
        rows.push(MetricLine {
            market: fields[0].to_string(),
            window: fields[1]
                .parse()
                .map_err(|_| file_err(path, line_no, "bad window".into()))?,
            model: fields[2].to_string(),
            metric: fields[3].to_string(),
            value: fields[4].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{run_experiment, MarketSpec, Overrides};
    use crate::boost::Variant;
    use crate::data::{gen_synthetic, write_frame_csv, SyntheticSpec};
    use chrono::TimeZone;

    fn t(y: i32, mo: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, mo, d, h, 0, 0).unwrap()
    }

    fn row(window: u32, model: &str, time: DateTime<Utc>, actual: f64, pred: f64) -> TraceRow {
        TraceRow {
            market: "m".into(),
            window,
            model: model.into(),
            time,
            actual,
            prediction: pred,
        }
    }

    #[test]
    fn seasonal_pooling_weights_hours_not_months() {
        // 24 June hours at absolute error 2, 72 July hours at error 4:
        // pooled summer MAE (24*2 + 72*4) / 96 = 3.5.
        let mut traces = Vec::new();
        for h in 0..24 {
            traces.push(row(7, "m1", t(2023, 6, 10, 0) + chrono::Duration::hours(h), 10.0, 8.0));
        }
        for h in 0..72 {
            traces.push(row(7, "m1", t(2023, 7, 3, 0) + chrono::Duration::hours(h), 10.0, 6.0));
        }
        let rows = seasonal_breakdown(&traces);
        assert_eq!(rows.len(), 1, "only one summer bucket: {rows:?}");
        assert_eq!(rows[0].season, "summer");
        assert_eq!(rows[0].hours, 96);
        assert!((rows[0].mae - 3.5).abs() < 1e-12);
    }

    #[test]
    fn season_map_splits_december_from_november() {
        let traces = vec![
            row(7, "m1", t(2023, 11, 30, 23), 1.0, 0.0),
            row(7, "m1", t(2023, 12, 1, 0), 1.0, 0.0),
            row(7, "m1", t(2024, 1, 15, 12), 1.0, 0.0),
        ];
        let rows = seasonal_breakdown(&traces);
        let seasons: Vec<&str> = rows.iter().map(|r| r.season).collect();
        assert!(seasons.contains(&"fall"));
        assert!(seasons.contains(&"winter"));
        let winter = rows.iter().find(|r| r.season == "winter").unwrap();
        assert_eq!(winter.hours, 2, "Dec and Jan pool into one winter bucket");
    }

    #[test]
    fn peak_valley_three_day_fixture_matches_hand_computation() {
        let mut traces = Vec::new();
        // Day 1: peak at hour 19 (100 vs 90, err 10), valley hour 3 (20 vs 22, err 2)
        // Day 2: peak at hour 12 (80 vs 81, err 1), valley hour 0 (10 vs 14, err 4)
        // Day 3: flat actuals -> peak = valley = hour 0 (first tie), err 3
        for h in 0..24u32 {
            let (a, p) = match h {
                19 => (100.0, 90.0),
                3 => (20.0, 22.0),
                _ => (50.0, 50.0),
            };
            traces.push(row(7, "m1", t(2023, 5, 1, h), a, p));
        }
        for h in 0..24u32 {
            let (a, p) = match h {
                12 => (80.0, 81.0),
                0 => (10.0, 14.0),
                _ => (40.0, 40.0),
            };
            traces.push(row(7, "m1", t(2023, 5, 2, h), a, p));
        }
        for h in 0..24u32 {
            traces.push(row(7, "m1", t(2023, 5, 3, h), 30.0, if h == 0 { 27.0 } else { 30.0 }));
        }
        let rows = peak_valley_analysis(&traces);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(r.days, 3);
        assert_eq!(r.partial_excluded, 0);
        assert!((r.peak_mae - (10.0 + 1.0 + 3.0) / 3.0).abs() < 1e-12);
        assert!((r.valley_mae - (2.0 + 4.0 + 3.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn partial_days_are_excluded_and_counted() {
        let mut traces = Vec::new();
        for h in 0..24u32 {
            traces.push(row(7, "m1", t(2023, 5, 1, h), 10.0 + h as f64, 10.0));
        }
        // second day only 23 hours
        for h in 0..23u32 {
            traces.push(row(7, "m1", t(2023, 5, 2, h), 10.0 + h as f64, 10.0));
        }
        let rows = peak_valley_analysis(&traces);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].days, 1);
        assert_eq!(rows[0].partial_excluded, 1);
        // complete day: peak hour 23 err 23, valley hour 0 err 0
        assert!((rows[0].peak_mae - 23.0).abs() < 1e-12);
        assert!((rows[0].valley_mae - 0.0).abs() < 1e-12);
    }

    #[test]
    fn fsi_requires_identical_hours() {
        let mut traces = Vec::new();
        for h in 0..24u32 {
            let actual = 10.0 + h as f64;
            traces.push(row(7, "naive", t(2023, 5, 1, h), actual, actual + 2.0));
            traces.push(row(7, "better", t(2023, 5, 1, h), actual, actual + 1.0));
        }
        // model covering different hours gets no fsi
        for h in 0..24u32 {
            let actual = 10.0 + h as f64;
            traces.push(row(7, "misaligned", t(2023, 5, 2, h), actual, actual + 1.0));
        }
        let rows = grouped_reports(&traces).unwrap();
        let find = |m: &str| rows.iter().find(|r| r.model == m).unwrap();
        assert_eq!(find("naive").report.fsi, Some(0.0));
        assert!((find("better").report.fsi.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(find("misaligned").report.fsi, None);
    }

    fn experiment_outcome(tag: &str) -> (ExperimentConfig, ExperimentOutcome) {
        let dir = std::env::temp_dir().join(format!("damcast_bench_report_{tag}"));
        std::fs::create_dir_all(&dir).unwrap();
        let data = dir.join("synth.csv");
        let frame = gen_synthetic(90, &SyntheticSpec::default(), 21);
        write_frame_csv(&frame, &data).unwrap();
        let cfg = ExperimentConfig {
            markets: vec![MarketSpec {
                name: "synth".into(),
                path: data,
            }],
            windows: vec![7],
            models: vec![
                crate::bench::ModelKind::Naive,
                crate::bench::ModelKind::Boosted(Variant::LevelwiseExact),
            ],
            months: vec![(2023, 2), (2023, 3)],
            seed: 5,
            out_dir: dir.join("report"),
            overrides: Overrides {
                trees: Some(20),
                max_depth: Some(3),
                learning_rate: Some(0.2),
                subsample: None,
                lstm: Default::default(),
            },
        };
        let outcome = run_experiment(&cfg, 1).unwrap();
        (cfg, outcome)
    }

    #[test]
    fn emitted_results_match_recomputation_from_traces_exactly() {
        let (cfg, outcome) = experiment_outcome("recompute");
        emit_report(&cfg, &outcome, &cfg.out_dir).unwrap();
        let traces = parse_traces_csv(&cfg.out_dir.join("traces.csv")).unwrap();
        let recomputed = recompute_results(&traces).unwrap();
        let emitted = parse_results_csv(&cfg.out_dir.join("results.csv")).unwrap();
        assert_eq!(emitted.len(), recomputed.len());
        for (a, b) in emitted.iter().zip(&recomputed) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn emission_is_byte_identical_across_runs_and_target_dirs() {
        let (cfg, outcome) = experiment_outcome("determinism");
        let dir_a = cfg.out_dir.parent().unwrap().join("report_a");
        let dir_b = cfg.out_dir.parent().unwrap().join("report_b");
        emit_report(&cfg, &outcome, &dir_a).unwrap();
        let outcome2 = run_experiment(&cfg, 3).unwrap();
        emit_report(&cfg, &outcome2, &dir_b).unwrap();
        for name in [
            "results.csv",
            "results_table.csv",
            "traces.csv",
            "breakdowns.txt",
            "manifest.txt",
        ] {
            let a = fs::read(dir_a.join(name)).unwrap();
            let b = fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn naive_fsi_renders_as_exact_zero_and_counts_stay_integral() {
        let (cfg, outcome) = experiment_outcome("naive_fsi");
        emit_report(&cfg, &outcome, &cfg.out_dir).unwrap();
        let lines = parse_results_csv(&cfg.out_dir.join("results.csv")).unwrap();
        let naive_fsi = lines
            .iter()
            .find(|l| l.model == "naive" && l.metric == "fsi")
            .unwrap();
        assert_eq!(naive_fsi.value, "0");
        let hours = lines
            .iter()
            .find(|l| l.model == "naive" && l.metric == "n_hours")
            .unwrap();
        // Feb 2023 -> 6 test days, Mar -> 7: (6+7)*24 pooled hours
        assert_eq!(hours.value, "312");
    }

    #[test]
    fn wide_table_has_window_by_metric_rows_and_market_model_columns() {
        let (_cfg, outcome) = experiment_outcome("wide_table");
        let aggregates = aggregate_results(&outcome).unwrap();
        let table = results_table_text(&aggregates);
        let mut lines = table.lines();
        assert_eq!(
            lines.next().unwrap(),
            "window_days,metric,synth/levelwise_exact,synth/naive"
        );
        // one window, five metrics
        assert_eq!(lines.count(), 5);
        assert!(table.contains("7,mae,"));
        assert!(table.contains("7,fsi,"));
    }

    #[test]
    fn malformed_report_files_are_rejected() {
        let dir = std::env::temp_dir().join("damcast_bench_report_bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("traces.csv");
        fs::write(&path, "wrong,header\n").unwrap();
        assert!(matches!(
            parse_traces_csv(&path),
            Err(BenchError::MalformedReportFile { line: 1, .. })
        ));
        fs::write(
            &path,
            format!("{TRACES_HEADER}\nm,7,naive,2023-05-01T00:00:00Z,12.5\n"),
        )
        .unwrap();
        assert!(matches!(
            parse_traces_csv(&path),
            Err(BenchError::MalformedReportFile { line: 2, .. })
        ));
        fs::write(
            &path,
            format!("{TRACES_HEADER}\nm,7,naive,2023-05-01T25:00:00Z,12.5,11.0\n"),
        )
        .unwrap();
        assert!(parse_traces_csv(&path).is_err());
    }

    #[test]
    fn trace_files_round_trip_full_precision() {
        let traces = vec![
            row(7, "naive", t(2023, 5, 1, 0), 0.1 + 0.2, 1e-17),
            row(7, "naive", t(2023, 5, 1, 1), -42.125, 99.999999999999999),
        ];
        let dir = std::env::temp_dir().join("damcast_bench_report_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("traces.csv");
        fs::write(&path, traces_csv_text(&traces)).unwrap();
        let back = parse_traces_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in traces.iter().zip(&back) {
            assert_eq!(a.actual.to_bits(), b.actual.to_bits());
            assert_eq!(a.prediction.to_bits(), b.prediction.to_bits());
            assert_eq!(a.time, b.time);
        }
    }
}
