//! LSTM price regressor with a feed-forward error-correction head.
//!
//! Stage 1 trains the LSTM on the 24 price-lag sequence of each supervised
//! row (one scalar input per step, zero initial state), minimizing mean
//! absolute error with Adam; inverted dropout masks the final hidden state.
//! Stage 2 freezes the LSTM and trains the correction head on
//! [lstm prediction || lag window] -> actual, same loss and optimizer.
//! Everything is deterministic for a fixed seed: initialization draws,
//! batch order, and dropout masks all come from one seeded stream.

mod adam;
mod cell;
mod ffec;
mod math;

pub use adam::{adam_update, AdamState};
pub use cell::{
    cell_forward, lstm_backward, lstm_backward_into, lstm_forward, LstmCache, LstmState,
    LstmWeights,
};
pub use ffec::{ffec_backward, ffec_backward_into, ffec_forward, FfecCache, FfecWeights};
pub use math::Mat;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::SupervisedDataset;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dataset has no lag columns to unroll over")]
    NoLagColumns,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub units: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch: usize,
    pub ffec_layer1: usize,
    pub ffec_layer2: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            units: 200,
            dropout: 0.2,
            learning_rate: 1e-4,
            epochs_stage1: 200,
            epochs_stage2: 200,
            batch: 256,
            ffec_layer1: 256,
            ffec_layer2: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        if self.units == 0 || self.batch == 0 || self.ffec_layer1 == 0 || self.ffec_layer2 == 0 {
            return Err(LstmError::InvalidConfig(
                "units, batch and layer sizes must be positive".into(),
            ));
        }
        if !(self.dropout >= 0.0 && self.dropout < 1.0) {
            return Err(LstmError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LstmError::InvalidConfig(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmFfecModel {
    pub lstm: LstmWeights,
    pub ffec: FfecWeights,
    pub n_lags: usize,
}

impl LstmFfecModel {
    fn sequence(&self, row: &[f64]) -> Result<Vec<Vec<f64>>, LstmError> {
        if row.len() < self.n_lags {
            return Err(LstmError::DimensionMismatch {
                expected: self.n_lags,
                got: row.len(),
            });
        }
        Ok(row[..self.n_lags].iter().map(|&v| vec![v]).collect())
    }

    /// Raw LSTM prediction, before error correction. Dropout is off.
    pub fn lstm_prediction_row(&self, row: &[f64]) -> Result<f64, LstmError> {
        let seq = self.sequence(row)?;
        Ok(lstm_forward(&seq, &self.lstm, None)?.0)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64, LstmError> {
        let pred = self.lstm_prediction_row(row)?;
        let mut u = Vec::with_capacity(1 + self.n_lags);
        u.push(pred);
        u.extend_from_slice(&row[..self.n_lags]);
        Ok(ffec_forward(&self.ffec, &u)?.0)
    }

    pub fn predict_dataset(&self, ds: &SupervisedDataset) -> Result<Vec<f64>, LstmError> {
        (0..ds.n_rows()).map(|r| self.predict_row(ds.row(r))).collect()
    }
}

fn sign(e: f64) -> f64 {
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn dropout_mask(units: usize, rate: f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Some(
        (0..units)
            .map(|_| if rng.gen_bool(keep) { scale } else { 0.0 })
            .collect(),
    )
}

/// Two-stage training per the fixed recipe; deterministic for a seed.
pub fn train_lstm_ffec(
    ds: &SupervisedDataset,
    cfg: &TrainConfig,
) -> Result<LstmFfecModel, LstmError> {
    cfg.validate()?;
    let n = ds.n_rows();
    if n == 0 {
        return Err(LstmError::EmptyDataset);
    }
    let n_lags = ds.n_lags();
    if n_lags == 0 {
        return Err(LstmError::NoLagColumns);
    }
    let y = ds.y();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lstm = LstmWeights::init(1, cfg.units, &mut rng);
    let mut ffec = FfecWeights::init(1 + n_lags, cfg.ffec_layer1, cfg.ffec_layer2, &mut rng);

    let seqs: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|r| ds.row(r)[..n_lags].iter().map(|&v| vec![v]).collect())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();

    // Stage 1: LSTM alone.
    let mut opt = AdamState::new(&lstm.pieces(), cfg.learning_rate);
    for _ in 0..cfg.epochs_stage1 {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let mut grads = LstmWeights::zeros(1, cfg.units);
            let inv = 1.0 / batch.len() as f64;
            for &r in batch {
                let mask = dropout_mask(cfg.units, cfg.dropout, &mut rng);
                let (pred, cache) = lstm_forward(&seqs[r], &lstm, mask)?;
                lstm_backward_into(&lstm, &cache, sign(pred - y[r]) * inv, &mut grads);
            }
            let grad_pieces = grads.pieces();
            opt.step(lstm.pieces_mut(), &grad_pieces);
        }
    }

    // Stage 2: freeze the LSTM, train the correction head on its outputs.
    let stage2_inputs: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let (pred, _) = lstm_forward(&seqs[r], &lstm, None)?;
            let mut u = Vec::with_capacity(1 + n_lags);
            u.push(pred);
            u.extend_from_slice(&ds.row(r)[..n_lags]);
            Ok(u)
        })
        .collect::<Result<_, LstmError>>()?;
    let mut opt2 = AdamState::new(&ffec.pieces(), cfg.learning_rate);
    for _ in 0..cfg.epochs_stage2 {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch) {
            let mut grads = FfecWeights::zeros(1 + n_lags, cfg.ffec_layer1, cfg.ffec_layer2);
            let inv = 1.0 / batch.len() as f64;
            for &r in batch {
                let (out, cache) = ffec_forward(&ffec, &stage2_inputs[r])?;
                ffec_backward_into(&ffec, &cache, sign(out - y[r]) * inv, &mut grads);
            }
            let grad_pieces = grads.pieces();
            opt2.step(ffec.pieces_mut(), &grad_pieces);
        }
    }

    Ok(LstmFfecModel {
        lstm,
        ffec,
        n_lags,
    })
}
