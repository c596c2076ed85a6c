//! Adam with bias correction, applied piecewise over flat parameter blocks.

/// One Adam update on a flat block. `t` is 1-based.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    debug_assert!(t >= 1);
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for k in 0..p.len() {
        m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
        let m_hat = m[k] / bc1;
        let v_hat = v[k] / bc2;
        p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Moment state shaped like a parameter set's pieces.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(pieces: &[&[f64]], lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: pieces.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: pieces.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: &[&[f64]]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        for (idx, p) in params.iter_mut().enumerate() {
            adam_update(
                p,
                grads[idx],
                &mut self.m[idx],
                &mut self.v[idx],
                self.t,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_and_moments_leave_parameters_unchanged() {
        let mut p = vec![1.5, -2.0, 0.0];
        let mut m = vec![0.0; 3];
        let mut v = vec![0.0; 3];
        adam_update(&mut p, &[0.0; 3], &mut m, &mut v, 1, 0.1, 0.9, 0.999, 1e-8);
        assert_eq!(p, vec![1.5, -2.0, 0.0]);
    }

    #[test]
    fn first_step_is_minus_lr_g_over_abs_g_plus_eps() {
        // bias corrections cancel at t=1: m_hat = g, v_hat = g^2
        let g = [3.0, -0.004, 1e-12];
        let mut p = vec![0.0; 3];
        let mut m = vec![0.0; 3];
        let mut v = vec![0.0; 3];
        let (lr, eps) = (0.05, 1e-8);
        adam_update(&mut p, &g, &mut m, &mut v, 1, lr, 0.9, 0.999, eps);
        for k in 0..3 {
            let expect = -lr * g[k] / (g[k].abs() + eps);
            assert!((p[k] - expect).abs() < 1e-15, "k={k}: {} vs {expect}", p[k]);
        }
    }

    #[test]
    fn identical_calls_are_deterministic() {
        let run = || {
            let mut p = vec![0.3, -0.7];
            let mut m = vec![0.01, 0.02];
            let mut v = vec![0.1, 0.2];
            adam_update(&mut p, &[0.5, -0.25], &mut m, &mut v, 3, 0.02, 0.9, 0.999, 1e-8);
            (p, m, v)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn repeated_steps_descend_a_parabola() {
        let mut p = vec![4.0];
        let mut st = AdamState::new(&[&p], 0.1);
        for _ in 0..200 {
            let g = vec![2.0 * p[0]];
            let gs: Vec<&[f64]> = vec![&g];
            st.step(vec![&mut p], &gs);
        }
        assert!(p[0].abs() < 0.5, "p = {}", p[0]);
        assert_eq!(st.t, 200);
    }
}
