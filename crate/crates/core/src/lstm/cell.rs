//! LSTM cell: gate equations, sequence unrolling, and exact reverse-mode
//! gradients through time.
//!
//! Gate preactivations are z_q = W_q x + R_q h_prev + b_q for q in
//! {f, g, i, o}; f/i/o squash through the logistic, the candidate g and the
//! cell output through tanh:
//!
//!   c = f (.) c_prev + i (.) g
//!   h = o (.) tanh(c)
//!
//! The scalar prediction is proj . h_T + proj_b after the last step. An
//! optional inverted-dropout mask (entries 0 or 1/keep) applies to h_T only,
//! so inference needs no rescaling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::math::{add_assign, dot, sigmoid, Mat};
use super::LstmError;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub input: usize,
    pub hidden: usize,
    pub w_f: Mat,
    pub w_g: Mat,
    pub w_i: Mat,
    pub w_o: Mat,
    pub r_f: Mat,
    pub r_g: Mat,
    pub r_i: Mat,
    pub r_o: Mat,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_o: Vec<f64>,
    pub proj: Vec<f64>,
    pub proj_b: f64,
}

impl LstmWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmWeights {
            input,
            hidden,
            w_f: Mat::zeros(hidden, input),
            w_g: Mat::zeros(hidden, input),
            w_i: Mat::zeros(hidden, input),
            w_o: Mat::zeros(hidden, input),
            r_f: Mat::zeros(hidden, hidden),
            r_g: Mat::zeros(hidden, hidden),
            r_i: Mat::zeros(hidden, hidden),
            r_o: Mat::zeros(hidden, hidden),
            b_f: vec![0.0; hidden],
            b_g: vec![0.0; hidden],
            b_i: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            proj: vec![0.0; hidden],
            proj_b: 0.0,
        }
    }

    /// Uniform +-1/sqrt(fan_in) weights, zero biases except forget bias +1.
    pub fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w = LstmWeights::zeros(input, hidden);
        let wb = 1.0 / (input as f64).sqrt();
        let rb = 1.0 / (hidden as f64).sqrt();
        for m in [&mut w.w_f, &mut w.w_g, &mut w.w_i, &mut w.w_o] {
            for v in &mut m.data {
                *v = rng.gen_range(-wb..wb);
            }
        }
        for m in [&mut w.r_f, &mut w.r_g, &mut w.r_i, &mut w.r_o] {
            for v in &mut m.data {
                *v = rng.gen_range(-rb..rb);
            }
        }
        for v in &mut w.b_f {
            *v = 1.0;
        }
        for v in &mut w.proj {
            *v = rng.gen_range(-rb..rb);
        }
        w
    }

    /// Flat views of every parameter block, in a fixed order shared with
    /// gradients and optimizer state.
    pub fn pieces(&self) -> Vec<&[f64]> {
        vec![
            &self.w_f.data,
            &self.w_g.data,
            &self.w_i.data,
            &self.w_o.data,
            &self.r_f.data,
            &self.r_g.data,
            &self.r_i.data,
            &self.r_o.data,
            &self.b_f,
            &self.b_g,
            &self.b_i,
            &self.b_o,
            &self.proj,
            std::slice::from_ref(&self.proj_b),
        ]
    }

    pub fn pieces_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w_f.data,
            &mut self.w_g.data,
            &mut self.w_i.data,
            &mut self.w_o.data,
            &mut self.r_f.data,
            &mut self.r_g.data,
            &mut self.r_i.data,
            &mut self.r_o.data,
            &mut self.b_f,
            &mut self.b_g,
            &mut self.b_i,
            &mut self.b_o,
            &mut self.proj,
            std::slice::from_mut(&mut self.proj_b),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one step's backward pass needs.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub tc: Vec<f64>,
}

fn gate_pre(w: &Mat, r: &Mat, b: &[f64], x: &[f64], h_prev: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    w.matvec_acc(x, &mut z);
    r.matvec_acc(h_prev, &mut z);
    z
}

pub fn cell_forward(
    x: &[f64],
    prev: &LstmState,
    w: &LstmWeights,
) -> Result<(LstmState, StepCache), LstmError> {
    if x.len() != w.input {
        return Err(LstmError::DimensionMismatch {
            expected: w.input,
            got: x.len(),
        });
    }
    if prev.h.len() != w.hidden {
        return Err(LstmError::DimensionMismatch {
            expected: w.hidden,
            got: prev.h.len(),
        });
    }
    let f: Vec<f64> = gate_pre(&w.w_f, &w.r_f, &w.b_f, x, &prev.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let g: Vec<f64> = gate_pre(&w.w_g, &w.r_g, &w.b_g, x, &prev.h)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let i: Vec<f64> = gate_pre(&w.w_i, &w.r_i, &w.b_i, x, &prev.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let o: Vec<f64> = gate_pre(&w.w_o, &w.r_o, &w.b_o, x, &prev.h)
        .into_iter()
        .map(sigmoid)
        .collect();
    let mut c = vec![0.0; w.hidden];
    let mut tc = vec![0.0; w.hidden];
    let mut h = vec![0.0; w.hidden];
    for j in 0..w.hidden {
        c[j] = f[j] * prev.c[j] + i[j] * g[j];
        tc[j] = c[j].tanh();
        h[j] = o[j] * tc[j];
    }
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        f,
        g,
        i,
        o,
        tc,
    };
    Ok((LstmState { h, c }, cache))
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub steps: Vec<StepCache>,
    /// Final hidden state before dropout.
    pub h_last: Vec<f64>,
    /// Inverted-dropout mask over h_last (entries 0 or 1/keep), if training.
    pub mask: Option<Vec<f64>>,
    /// h_last after the mask; what the projection actually saw.
    pub h_proj: Vec<f64>,
}

/// Unroll from the zero state and project the final hidden state to a
/// scalar. `mask`, when given, is applied to the final hidden state only.
pub fn lstm_forward(
    seq: &[Vec<f64>],
    w: &LstmWeights,
    mask: Option<Vec<f64>>,
) -> Result<(f64, LstmCache), LstmError> {
    if seq.is_empty() {
        return Err(LstmError::EmptySequence);
    }
    let mut state = LstmState::zeros(w.hidden);
    let mut steps = Vec::with_capacity(seq.len());
    for x in seq {
        let (next, cache) = cell_forward(x, &state, w)?;
        steps.push(cache);
        state = next;
    }
    let h_last = state.h;
    let h_proj = match &mask {
        Some(m) => {
            if m.len() != w.hidden {
                return Err(LstmError::DimensionMismatch {
                    expected: w.hidden,
                    got: m.len(),
                });
            }
            h_last.iter().zip(m).map(|(h, s)| h * s).collect()
        }
        None => h_last.clone(),
    };
    let pred = dot(&w.proj, &h_proj) + w.proj_b;
    Ok((
        pred,
        LstmCache {
            steps,
            h_last,
            mask,
            h_proj,
        },
    ))
}

/// Accumulate d(loss)/d(weights) into `grads` given d(loss)/d(prediction).
/// Reverse accumulation through every unrolled step.
pub fn lstm_backward_into(
    w: &LstmWeights,
    cache: &LstmCache,
    d_pred: f64,
    grads: &mut LstmWeights,
) {
    let hsz = w.hidden;
    grads.proj_b += d_pred;
    for j in 0..hsz {
        grads.proj[j] += d_pred * cache.h_proj[j];
    }
    // dh at the last step, routed back through the dropout mask
    let mut dh: Vec<f64> = (0..hsz).map(|j| w.proj[j] * d_pred).collect();
    if let Some(m) = &cache.mask {
        for j in 0..hsz {
            dh[j] *= m[j];
        }
    }
    let mut dc = vec![0.0; hsz];
    let mut dzf = vec![0.0; hsz];
    let mut dzg = vec![0.0; hsz];
    let mut dzi = vec![0.0; hsz];
    let mut dzo = vec![0.0; hsz];
    for s in cache.steps.iter().rev() {
        for j in 0..hsz {
            // h = o (.) tanh(c)
            dzo[j] = dh[j] * s.tc[j] * s.o[j] * (1.0 - s.o[j]);
            dc[j] += dh[j] * s.o[j] * (1.0 - s.tc[j] * s.tc[j]);
            // c = f (.) c_prev + i (.) g
            dzf[j] = dc[j] * s.c_prev[j] * s.f[j] * (1.0 - s.f[j]);
            dzi[j] = dc[j] * s.g[j] * s.i[j] * (1.0 - s.i[j]);
            dzg[j] = dc[j] * s.i[j] * (1.0 - s.g[j] * s.g[j]);
        }
        grads.w_f.add_outer(&dzf, &s.x);
        grads.w_g.add_outer(&dzg, &s.x);
        grads.w_i.add_outer(&dzi, &s.x);
        grads.w_o.add_outer(&dzo, &s.x);
        grads.r_f.add_outer(&dzf, &s.h_prev);
        grads.r_g.add_outer(&dzg, &s.h_prev);
        grads.r_i.add_outer(&dzi, &s.h_prev);
        grads.r_o.add_outer(&dzo, &s.h_prev);
        add_assign(&mut grads.b_f, &dzf);
        add_assign(&mut grads.b_g, &dzg);
        add_assign(&mut grads.b_i, &dzi);
        add_assign(&mut grads.b_o, &dzo);
        let mut dh_prev = vec![0.0; hsz];
        w.r_f.tvec_acc(&dzf, &mut dh_prev);
        w.r_g.tvec_acc(&dzg, &mut dh_prev);
        w.r_i.tvec_acc(&dzi, &mut dh_prev);
        w.r_o.tvec_acc(&dzo, &mut dh_prev);
        for j in 0..hsz {
            dc[j] *= s.f[j];
        }
        dh = dh_prev;
    }
}

/// Fresh gradient container version of [`lstm_backward_into`].
pub fn lstm_backward(w: &LstmWeights, cache: &LstmCache, d_pred: f64) -> LstmWeights {
    let mut grads = LstmWeights::zeros(w.input, w.hidden);
    lstm_backward_into(w, cache, d_pred, &mut grads);
    grads
}
