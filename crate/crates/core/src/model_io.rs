//! Versioned, self-describing text container for fitted models.
//!
//! One format holds both model families: boosted tree ensembles (variant,
//! base score, learning rate, categorical encoders, bundle map, trees as
//! preorder node lists) and LSTM/FFEC weight sets (named parameter records).
//! An optional scaler record travels with either kind so a saved model can
//! score raw CSV columns. Floats are written in shortest round-trip form, so
//! a load reproduces the saved model's predictions bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::boost::{Ensemble, Variant};
use crate::data::ScalerParams;
use crate::lstm::{FfecWeights, LstmFfecModel, LstmWeights};
use crate::tree::{Bundle, BundleMap, BundleMember, CategoryEncoder, DecisionTree, Node};

pub const FORMAT_HEADER: &str = "damcast model v1";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported model container header {0:?}")]
    Version(String),
}

#[derive(Debug, Clone)]
pub enum SavedModel {
    Ensemble(Ensemble),
    LstmFfec(LstmFfecModel),
}

/// A model plus the scaler its inputs were normalized with (when any).
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: SavedModel,
    pub scaler: Option<ScalerParams>,
}

pub fn write_model(path: &Path, file: &ModelFile) -> Result<(), ModelIoError> {
    fs::write(path, model_to_string(file))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelFile, ModelIoError> {
    model_from_str(&fs::read_to_string(path)?)
}

pub fn model_to_string(file: &ModelFile) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    match &file.model {
        SavedModel::Ensemble(e) => write_ensemble(&mut out, e),
        SavedModel::LstmFfec(m) => write_lstm_ffec(&mut out, m),
    }
    if let Some(s) = &file.scaler {
        let _ = writeln!(out, "scaler {} {:?} {:?}", s.n_columns(), s.low, s.up);
        for (mn, mx) in s.mins.iter().zip(&s.maxs) {
            let _ = writeln!(out, "col {mn:?} {mx:?}");
        }
    }
    out.push_str("end\n");
    out
}

pub fn model_from_str(text: &str) -> Result<ModelFile, ModelIoError> {
    let mut cur = Cursor::new(text);
    let header = cur.next_line()?;
    if header != FORMAT_HEADER {
        return Err(ModelIoError::Version(header.to_string()));
    }
    let kind = cur.field_line("kind")?;
    let model = match kind.as_str() {
        "ensemble" => SavedModel::Ensemble(read_ensemble(&mut cur)?),
        "lstm_ffec" => SavedModel::LstmFfec(read_lstm_ffec(&mut cur)?),
        other => return Err(cur.err(format!("unknown model kind {other:?}"))),
    };
    let mut scaler = None;
    let closing = cur.next_line()?;
    if let Some(rest) = closing.strip_prefix("scaler ") {
        scaler = Some(read_scaler(&mut cur, rest)?);
        if cur.next_line()? != "end" {
            return Err(cur.err("expected end marker".into()));
        }
    } else if closing != "end" {
        return Err(cur.err(format!("expected scaler record or end marker, got {closing:?}")));
    }
    Ok(ModelFile { model, scaler })
}

fn write_ensemble(out: &mut String, e: &Ensemble) {
    let _ = writeln!(out, "kind ensemble");
    let _ = writeln!(out, "variant {}", e.variant.name());
    let _ = writeln!(out, "base_score {:?}", e.base_score);
    let _ = writeln!(out, "learning_rate {:?}", e.learning_rate);
    let _ = writeln!(out, "n_features {}", e.n_features);
    let _ = writeln!(out, "encoders {}", e.encoders.len());
    for enc in &e.encoders {
        let _ = writeln!(
            out,
            "encoder {} {:?} {:?} {}",
            enc.slot,
            enc.prior,
            enc.strength,
            enc.entries.len()
        );
        for (raw, encoded) in &enc.entries {
            let _ = writeln!(out, "entry {raw:?} {encoded:?}");
        }
    }
    if let Some(map) = &e.bundles {
        let _ = writeln!(out, "bundles {} {}", map.bundles.len(), map.n_source_features);
        for bundle in &map.bundles {
            let _ = writeln!(out, "bundle {}", bundle.members.len());
            for m in &bundle.members {
                let _ = writeln!(out, "member {} {:?} {:?}", m.feature, m.offset, m.max);
            }
        }
    }
    let _ = writeln!(out, "trees {}", e.trees.len());
    for tree in &e.trees {
        let _ = writeln!(out, "tree {}", tree.nodes.len());
        write_nodes_preorder(out, &tree.nodes, 0);
    }
}

fn write_nodes_preorder(out: &mut String, nodes: &[Node], idx: usize) {
    match &nodes[idx] {
        Node::Leaf { weight } => {
            let _ = writeln!(out, "l {weight:?}");
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "s {feature} {threshold:?}");
            write_nodes_preorder(out, nodes, *left as usize);
            write_nodes_preorder(out, nodes, *right as usize);
        }
    }
}

fn read_ensemble(cur: &mut Cursor) -> Result<Ensemble, ModelIoError> {
    let variant_name = cur.field_line("variant")?;
    let variant = Variant::from_name(&variant_name)
        .ok_or_else(|| cur.err(format!("unknown ensemble variant {variant_name:?}")))?;
    let base_score: f64 = cur.parse_field("base_score")?;
    let learning_rate: f64 = cur.parse_field("learning_rate")?;
    let n_features: usize = cur.parse_field("n_features")?;
    let n_encoders: usize = cur.parse_field("encoders")?;
    let mut encoders = Vec::with_capacity(n_encoders);
    for _ in 0..n_encoders {
        let parts = cur.fields_line("encoder", 4)?;
        let slot = cur.parse_part(&parts[0], "encoder slot")?;
        let prior = cur.parse_part(&parts[1], "encoder prior")?;
        let strength = cur.parse_part(&parts[2], "encoder strength")?;
        let n_entries: usize = cur.parse_part(&parts[3], "encoder entry count")?;
        let mut entries = Vec::with_capacity(n_entries);
        for _ in 0..n_entries {
            let p = cur.fields_line("entry", 2)?;
            entries.push((
                cur.parse_part(&p[0], "entry raw value")?,
                cur.parse_part(&p[1], "entry encoded value")?,
            ));
        }
        encoders.push(CategoryEncoder {
            slot,
            prior,
            strength,
            entries,
        });
    }
    let mut bundles = None;
    let trees_line = cur.next_line()?;
    let n_trees: usize = if let Some(rest) = trees_line.strip_prefix("bundles ") {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(cur.err("bundles record needs bundle and source feature counts".into()));
        }
        let n_bundles: usize = cur.parse_part(parts[0], "bundle count")?;
        let n_source_features = cur.parse_part(parts[1], "source feature count")?;
        let mut list = Vec::with_capacity(n_bundles);
        for _ in 0..n_bundles {
            let n_members: usize = cur.parse_field("bundle")?;
            let mut members = Vec::with_capacity(n_members);
            for _ in 0..n_members {
                let p = cur.fields_line("member", 3)?;
                members.push(BundleMember {
                    feature: cur.parse_part(&p[0], "member feature")?,
                    offset: cur.parse_part(&p[1], "member offset")?,
                    max: cur.parse_part(&p[2], "member max")?,
                });
            }
            list.push(Bundle { members });
        }
        bundles = Some(BundleMap {
            bundles: list,
            n_source_features,
        });
        cur.parse_field("trees")?
    } else if let Some(rest) = trees_line.strip_prefix("trees ") {
        cur.parse_part(rest.trim(), "tree count")?
    } else {
        return Err(cur.err(format!("expected bundles or trees record, got {trees_line:?}")));
    };
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes: usize = cur.parse_field("tree")?;
        trees.push(read_tree(cur, n_nodes)?);
    }
    Ok(Ensemble {
        variant,
        base_score,
        learning_rate,
        n_features,
        trees,
        encoders,
        bundles,
    })
}

/// Rebuild a tree from its preorder listing. Node indices are assigned in
/// preorder, which may differ from the layout the builder produced; only the
/// predictions are contractual, and those are index-independent.
fn read_tree(cur: &mut Cursor, n_nodes: usize) -> Result<DecisionTree, ModelIoError> {
    let mut nodes = Vec::with_capacity(n_nodes);
    read_node(cur, &mut nodes)?;
    if nodes.len() != n_nodes {
        return Err(cur.err(format!(
            "tree declared {n_nodes} nodes but listed {}",
            nodes.len()
        )));
    }
    Ok(DecisionTree { nodes })
}

fn read_node(cur: &mut Cursor, nodes: &mut Vec<Node>) -> Result<u32, ModelIoError> {
    let line = cur.next_line()?.to_string();
    if let Some(rest) = line.strip_prefix("l ") {
        let weight = cur.parse_part(rest.trim(), "leaf weight")?;
        nodes.push(Node::Leaf { weight });
        return Ok((nodes.len() - 1) as u32);
    }
    if let Some(rest) = line.strip_prefix("s ") {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(cur.err("split node needs a feature and a threshold".into()));
        }
        let feature = cur.parse_part(parts[0], "split feature")?;
        let threshold = cur.parse_part(parts[1], "split threshold")?;
        let slot = nodes.len();
        nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = read_node(cur, nodes)?;
        let right = read_node(cur, nodes)?;
        nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        return Ok(slot as u32);
    }
    Err(cur.err(format!("expected a node line, got {line:?}")))
}

fn write_lstm_ffec(out: &mut String, m: &LstmFfecModel) {
    let _ = writeln!(out, "kind lstm_ffec");
    let _ = writeln!(out, "n_lags {}", m.n_lags);
    let _ = writeln!(out, "lstm {} {}", m.lstm.input, m.lstm.hidden);
    for (name, piece) in LSTM_PIECES.iter().zip(m.lstm.pieces()) {
        write_piece(out, name, piece);
    }
    let _ = writeln!(
        out,
        "ffec {} {} {}",
        m.ffec.input, m.ffec.w1.rows, m.ffec.w2.rows
    );
    for (name, piece) in FFEC_PIECES.iter().zip(m.ffec.pieces()) {
        write_piece(out, name, piece);
    }
}

/// Names follow the order of `LstmWeights::pieces` / `FfecWeights::pieces`.
const LSTM_PIECES: [&str; 14] = [
    "w_f", "w_g", "w_i", "w_o", "r_f", "r_g", "r_i", "r_o", "b_f", "b_g", "b_i", "b_o", "proj",
    "proj_b",
];
const FFEC_PIECES: [&str; 6] = ["w1", "b1", "w2", "b2", "w3", "b3"];

fn write_piece(out: &mut String, name: &str, values: &[f64]) {
    out.push_str(name);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

fn read_lstm_ffec(cur: &mut Cursor) -> Result<LstmFfecModel, ModelIoError> {
    let n_lags: usize = cur.parse_field("n_lags")?;
    let dims = cur.fields_line("lstm", 2)?;
    let input: usize = cur.parse_part(&dims[0], "lstm input size")?;
    let hidden: usize = cur.parse_part(&dims[1], "lstm hidden size")?;
    let mut lstm = LstmWeights::zeros(input, hidden);
    for (name, piece) in LSTM_PIECES.iter().zip(lstm.pieces_mut()) {
        read_piece(cur, name, piece)?;
    }
    let dims = cur.fields_line("ffec", 3)?;
    let f_input: usize = cur.parse_part(&dims[0], "ffec input size")?;
    let l1: usize = cur.parse_part(&dims[1], "ffec layer 1 size")?;
    let l2: usize = cur.parse_part(&dims[2], "ffec layer 2 size")?;
    let mut ffec = FfecWeights::zeros(f_input, l1, l2);
    for (name, piece) in FFEC_PIECES.iter().zip(ffec.pieces_mut()) {
        read_piece(cur, name, piece)?;
    }
    Ok(LstmFfecModel { lstm, ffec, n_lags })
}

fn read_piece(cur: &mut Cursor, name: &str, into: &mut [f64]) -> Result<(), ModelIoError> {
    let line = cur.next_line()?.to_string();
    let rest = line
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
        .ok_or_else(|| cur.err(format!("expected parameter record {name:?}, got {line:?}")))?;
    let mut count = 0;
    for (slot, tok) in into.iter_mut().zip(rest.split_whitespace()) {
        *slot = cur.parse_part(tok, name)?;
        count += 1;
    }
    if count != into.len() || rest.split_whitespace().count() != into.len() {
        return Err(cur.err(format!(
            "parameter record {name:?} needs {} values",
            into.len()
        )));
    }
    Ok(())
}

fn read_scaler(cur: &mut Cursor, header_rest: &str) -> Result<ScalerParams, ModelIoError> {
    let parts: Vec<&str> = header_rest.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(cur.err("scaler record needs a column count and two bounds".into()));
    }
    let n: usize = cur.parse_part(parts[0], "scaler column count")?;
    let low = cur.parse_part(parts[1], "scaler low bound")?;
    let up = cur.parse_part(parts[2], "scaler up bound")?;
    let mut mins = Vec::with_capacity(n);
    let mut maxs = Vec::with_capacity(n);
    for _ in 0..n {
        let p = cur.fields_line("col", 2)?;
        mins.push(cur.parse_part(&p[0], "scaler column min")?);
        maxs.push(cur.parse_part(&p[1], "scaler column max")?);
    }
    Ok(ScalerParams {
        mins,
        maxs,
        low,
        up,
    })
}

/// Line-by-line reader that remembers its position for error reporting.
struct Cursor<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn err(&self, msg: String) -> ModelIoError {
        ModelIoError::Parse {
            line: self.line_no,
            msg,
        }
    }

    fn next_line(&mut self) -> Result<&'a str, ModelIoError> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or(ModelIoError::Parse {
                line: self.line_no,
                msg: "unexpected end of file".into(),
            })
    }

    /// Read `key <value>` and return the value.
    fn field_line(&mut self, key: &str) -> Result<String, ModelIoError> {
        let line = self.next_line()?;
        match line.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) if !rest.trim().is_empty() => Ok(rest.trim().to_string()),
            _ => Err(self.err(format!("expected {key:?} record, got {line:?}"))),
        }
    }

    /// Read `key <v1> ... <vn>` with exactly n values.
    fn fields_line(&mut self, key: &str, n: usize) -> Result<Vec<String>, ModelIoError> {
        let rest = self.field_line(key)?;
        let parts: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
        if parts.len() != n {
            return Err(self.err(format!("{key:?} record needs {n} values")));
        }
        Ok(parts)
    }

    fn parse_field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelIoError> {
        let value = self.field_line(key)?;
        self.parse_part(&value, key)
    }

    fn parse_part<T: std::str::FromStr>(&self, token: &str, what: &str) -> Result<T, ModelIoError> {
        token
            .parse()
            .map_err(|_| self.err(format!("cannot parse {what} from {token:?}")))
    }
}
