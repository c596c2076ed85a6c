//! Feed-forward error-correction head: [lstm prediction || history window]
//! through two rectified hidden layers to a corrected scalar price.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::math::{add_assign, dot, Mat};
use super::LstmError;

#[derive(Debug, Clone, PartialEq)]
pub struct FfecWeights {
    pub input: usize,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

impl FfecWeights {
    pub fn zeros(input: usize, l1: usize, l2: usize) -> Self {
        FfecWeights {
            input,
            w1: Mat::zeros(l1, input),
            b1: vec![0.0; l1],
            w2: Mat::zeros(l2, l1),
            b2: vec![0.0; l2],
            w3: vec![0.0; l2],
            b3: 0.0,
        }
    }

    pub fn init(input: usize, l1: usize, l2: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w = FfecWeights::zeros(input, l1, l2);
        let b1 = 1.0 / (input as f64).sqrt();
        for v in &mut w.w1.data {
            *v = rng.gen_range(-b1..b1);
        }
        let b2 = 1.0 / (l1 as f64).sqrt();
        for v in &mut w.w2.data {
            *v = rng.gen_range(-b2..b2);
        }
        let b3 = 1.0 / (l2 as f64).sqrt();
        for v in &mut w.w3 {
            *v = rng.gen_range(-b3..b3);
        }
        w
    }

    pub fn pieces(&self) -> Vec<&[f64]> {
        vec![
            &self.w1.data,
            &self.b1,
            &self.w2.data,
            &self.b2,
            &self.w3,
            std::slice::from_ref(&self.b3),
        ]
    }

    pub fn pieces_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w1.data,
            &mut self.b1,
            &mut self.w2.data,
            &mut self.b2,
            &mut self.w3,
            std::slice::from_mut(&mut self.b3),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct FfecCache {
    pub u: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

pub fn ffec_forward(w: &FfecWeights, u: &[f64]) -> Result<(f64, FfecCache), LstmError> {
    if u.len() != w.input {
        return Err(LstmError::DimensionMismatch {
            expected: w.input,
            got: u.len(),
        });
    }
    let mut a1 = w.b1.clone();
    w.w1.matvec_acc(u, &mut a1);
    for v in &mut a1 {
        *v = v.max(0.0);
    }
    let mut a2 = w.b2.clone();
    w.w2.matvec_acc(&a1, &mut a2);
    for v in &mut a2 {
        *v = v.max(0.0);
    }
    let out = dot(&w.w3, &a2) + w.b3;
    Ok((
        out,
        FfecCache {
            u: u.to_vec(),
            a1,
            a2,
        },
    ))
}

/// Accumulate d(loss)/d(weights) into `grads` given d(loss)/d(output).
pub fn ffec_backward_into(w: &FfecWeights, cache: &FfecCache, d_out: f64, grads: &mut FfecWeights) {
    grads.b3 += d_out;
    for (gw, a) in grads.w3.iter_mut().zip(&cache.a2) {
        *gw += d_out * a;
    }
    // relu'(z) expressed through the activation: a > 0 <=> z > 0
    let da2: Vec<f64> = w
        .w3
        .iter()
        .zip(&cache.a2)
        .map(|(wv, a)| if *a > 0.0 { wv * d_out } else { 0.0 })
        .collect();
    grads.w2.add_outer(&da2, &cache.a1);
    add_assign(&mut grads.b2, &da2);
    let mut da1 = vec![0.0; cache.a1.len()];
    w.w2.tvec_acc(&da2, &mut da1);
    for (d, a) in da1.iter_mut().zip(&cache.a1) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
    grads.w1.add_outer(&da1, &cache.u);
    add_assign(&mut grads.b1, &da1);
}

pub fn ffec_backward(w: &FfecWeights, cache: &FfecCache, d_out: f64) -> FfecWeights {
    let mut grads = FfecWeights::zeros(w.input, w.b1.len(), w.b2.len());
    ffec_backward_into(w, cache, d_out, &mut grads);
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_output_the_bias() {
        let mut w = FfecWeights::zeros(5, 7, 6);
        w.b3 = -3.25;
        let (out, _) = ffec_forward(&w, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(out, -3.25);
        assert!(ffec_forward(&w, &[1.0]).is_err());
    }

    #[test]
    fn pass_through_wiring_reproduces_the_lstm_prediction() {
        // unit 0 of each layer relays input 0; everything else stays dead
        let mut w = FfecWeights::zeros(4, 3, 2);
        w.w1.set(0, 0, 1.0);
        w.w2.set(0, 0, 1.0);
        w.w3[0] = 1.0;
        let lstm_pred = 3.7;
        let (out, _) = ffec_forward(&w, &[lstm_pred, 0.4, -0.2, 0.9]).unwrap();
        assert_eq!(out, lstm_pred);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients_and_bias_is_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = FfecWeights::init(5, 7, 6, &mut rng);
        let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = ffec_forward(&w, &u).unwrap();
        assert_eq!(ffec_backward(&w, &cache, 0.0), FfecWeights::zeros(5, 7, 6));
        let grads = ffec_backward(&w, &cache, 0.6);
        assert_eq!(grads.b3, 0.6);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let eps = 1e-5;
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
            let mut w = FfecWeights::init(5, 7, 6, &mut rng);
            w.b3 = 0.3;
            for v in &mut w.b1 {
                *v = rng.gen_range(-0.2..0.2);
            }
            for v in &mut w.b2 {
                *v = rng.gen_range(-0.2..0.2);
            }
            let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, cache) = ffec_forward(&w, &u).unwrap();
            let analytic = ffec_backward(&w, &cache, 1.0);
            let a_pieces = analytic.pieces();
            for piece in 0..a_pieces.len() {
                for k in 0..a_pieces[piece].len() {
                    let mut wp = w.clone();
                    wp.pieces_mut()[piece][k] += eps;
                    let (up, _) = ffec_forward(&wp, &u).unwrap();
                    let mut wm = w.clone();
                    wm.pieces_mut()[piece][k] -= eps;
                    let (dn, _) = ffec_forward(&wm, &u).unwrap();
                    let fd = (up - dn) / (2.0 * eps);
                    let an = a_pieces[piece][k];
                    let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                    assert!(
                        rel < 1e-4,
                        "piece {piece} entry {k}: analytic {an} vs fd {fd}"
                    );
                }
            }
        }
    }
}
