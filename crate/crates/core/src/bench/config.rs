//! Flat key-value experiment configuration.
//!
//! One `key value` pair per line; repeated keys build lists. `#` starts a
//! comment. Unknown keys are errors so typos cannot silently drop settings.

use std::path::PathBuf;

use super::{BenchError, ModelKind, MODEL_NAMES};
use crate::data::WINDOW_CHOICES;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketSpec {
    pub name: String,
    pub path: PathBuf,
}

/// Hyperparameter overrides applied on top of the per-model presets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub learning_rate: Option<f64>,
    pub subsample: Option<f64>,
    pub lstm: LstmOverrides,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LstmOverrides {
    pub units: Option<usize>,
    pub epochs_stage1: Option<usize>,
    pub epochs_stage2: Option<usize>,
    pub batch: Option<usize>,
    pub learning_rate: Option<f64>,
    pub dropout: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub markets: Vec<MarketSpec>,
    pub windows: Vec<u32>,
    pub models: Vec<ModelKind>,
    /// (year, month) pairs, evaluated in listed order.
    pub months: Vec<(i32, u32)>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub overrides: Overrides,
}

impl ExperimentConfig {
    pub fn grid_size(&self) -> usize {
        self.markets.len() * self.windows.len() * self.models.len() * self.months.len()
    }

    /// Canonical single-line echo of every setting, for the run manifest.
    pub fn echo_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for m in &self.markets {
            lines.push(format!("market {} {}", m.name, m.path.display()));
        }
        for w in &self.windows {
            lines.push(format!("window {w}"));
        }
        for m in &self.models {
            lines.push(format!("model {}", m.name()));
        }
        for (y, mo) in &self.months {
            lines.push(format!("month {y:04}-{mo:02}"));
        }
        lines.push(format!("seed {}", self.seed));
        lines.push(format!("out {}", self.out_dir.display()));
        let o = &self.overrides;
        let mut opt = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                lines.push(format!("{k} {v}"));
            }
        };
        opt("trees", o.trees.map(|v| v.to_string()));
        opt("max_depth", o.max_depth.map(|v| v.to_string()));
        opt("learning_rate", o.learning_rate.map(|v| format!("{v:?}")));
        opt("subsample", o.subsample.map(|v| format!("{v:?}")));
        opt("lstm_units", o.lstm.units.map(|v| v.to_string()));
        opt("lstm_epochs1", o.lstm.epochs_stage1.map(|v| v.to_string()));
        opt("lstm_epochs2", o.lstm.epochs_stage2.map(|v| v.to_string()));
        opt("lstm_batch", o.lstm.batch.map(|v| v.to_string()));
        opt(
            "lstm_learning_rate",
            o.lstm.learning_rate.map(|v| format!("{v:?}")),
        );
        opt("lstm_dropout", o.lstm.dropout.map(|v| format!("{v:?}")));
        lines
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, BenchError> {
    let mut markets: Vec<MarketSpec> = Vec::new();
    let mut windows: Vec<u32> = Vec::new();
    let mut models: Vec<ModelKind> = Vec::new();
    let mut months: Vec<(i32, u32)> = Vec::new();
    let mut seed: u64 = 0;
    let mut out_dir: Option<PathBuf> = None;
    let mut overrides = Overrides::default();

    let err = |line: usize, msg: String| BenchError::Config { line, msg };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| err(line_no, format!("key {line:?} has no value")))?;
        let rest = rest.trim();
        match key {
            "market" => {
                let (name, path) = rest
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err(line_no, "market needs a name and a path".into()))?;
                if !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(err(
                        line_no,
                        format!("market name {name:?} (use letters, digits, _, -)"),
                    ));
                }
                if markets.iter().any(|m| m.name == name) {
                    return Err(err(line_no, format!("duplicate market {name:?}")));
                }
                markets.push(MarketSpec {
                    name: name.to_string(),
                    path: PathBuf::from(path.trim()),
                });
            }
            "window" => {
                let w: u32 = rest
                    .parse()
                    .map_err(|_| err(line_no, format!("bad window {rest:?}")))?;
                if !WINDOW_CHOICES.contains(&w) {
                    return Err(err(
                        line_no,
                        format!("window {w} not in {WINDOW_CHOICES:?}"),
                    ));
                }
                if windows.contains(&w) {
                    return Err(err(line_no, format!("duplicate window {w}")));
                }
                windows.push(w);
            }
            "model" => {
                let m = ModelKind::from_name(rest).ok_or_else(|| {
                    err(
                        line_no,
                        format!("unknown model {rest:?} (choose from {MODEL_NAMES:?})"),
                    )
                })?;
                if models.contains(&m) {
                    return Err(err(line_no, format!("duplicate model {rest}")));
                }
                models.push(m);
            }
            "month" => {
                let ym = parse_month(rest)
                    .ok_or_else(|| err(line_no, format!("bad month {rest:?} (want YYYY-MM)")))?;
                if months.contains(&ym) {
                    return Err(err(line_no, format!("duplicate month {rest}")));
                }
                months.push(ym);
            }
            "seed" => {
                seed = rest
                    .parse()
                    .map_err(|_| err(line_no, format!("bad seed {rest:?}")))?;
            }
            "out" => out_dir = Some(PathBuf::from(rest)),
            "trees" => overrides.trees = Some(parse_num(rest, line_no, "trees")?),
            "max_depth" => overrides.max_depth = Some(parse_num(rest, line_no, "max_depth")?),
            "learning_rate" => {
                overrides.learning_rate = Some(parse_num(rest, line_no, "learning_rate")?)
            }
            "subsample" => overrides.subsample = Some(parse_num(rest, line_no, "subsample")?),
            "lstm_units" => overrides.lstm.units = Some(parse_num(rest, line_no, "lstm_units")?),
            "lstm_epochs1" => {
                overrides.lstm.epochs_stage1 = Some(parse_num(rest, line_no, "lstm_epochs1")?)
            }
            "lstm_epochs2" => {
                overrides.lstm.epochs_stage2 = Some(parse_num(rest, line_no, "lstm_epochs2")?)
            }
            "lstm_batch" => overrides.lstm.batch = Some(parse_num(rest, line_no, "lstm_batch")?),
            "lstm_learning_rate" => {
                overrides.lstm.learning_rate = Some(parse_num(rest, line_no, "lstm_learning_rate")?)
            }
            "lstm_dropout" => {
                overrides.lstm.dropout = Some(parse_num(rest, line_no, "lstm_dropout")?)
            }
            other => return Err(err(line_no, format!("unknown key {other:?}"))),
        }
    }

    let end = text.lines().count();
    if markets.is_empty() {
        return Err(err(end, "config lists no markets".into()));
    }
    if windows.is_empty() {
        return Err(err(end, "config lists no windows".into()));
    }
    if models.is_empty() {
        return Err(err(end, "config lists no models".into()));
    }
    if months.is_empty() {
        return Err(err(end, "config lists no months".into()));
    }
    let out_dir = out_dir.ok_or_else(|| err(end, "config sets no out directory".into()))?;

    Ok(ExperimentConfig {
        markets,
        windows,
        models,
        months,
        seed,
        out_dir,
        overrides,
    })
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, key: &str) -> Result<T, BenchError> {
    s.parse().map_err(|_| BenchError::Config {
        line,
        msg: format!("bad {key} {s:?}"),
    })
}

fn parse_month(s: &str) -> Option<(i32, u32)> {
    let (y, m) = s.split_once('-')?;
    if y.len() != 4 || m.len() != 2 {
        return None;
    }
    let year: i32 = y.parse().ok()?;
    let month: u32 = m.parse().ok()?;
    (1..=12).contains(&month).then_some((year, month))
}
