//! One-sided gradient sampling: keep every large-gradient row, subsample the
//! small-gradient rest and scale those rows up to stay unbiased.

use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;

use super::TreeError;

#[derive(Debug, Clone, PartialEq)]
pub struct GossSample {
    /// Selected row indices, ascending.
    pub rows: Vec<usize>,
    /// Multiplier per selected row, aligned with `rows`: 1 for the kept
    /// top-gradient rows, (1-a)/b for the sampled remainder. The multiplier
    /// applies to both the gradient and the hessian of the row.
    pub weights: Vec<f64>,
}

/// Keep the floor(a*n) rows with the largest |gradient| (ties broken toward
/// the lower row index), then draw floor(b*n) of the remaining rows uniformly
/// without replacement, weighting them by (1-a)/b.
pub fn goss_sample(
    grads: &[f64],
    a: f64,
    b: f64,
    rng: &mut ChaCha8Rng,
) -> Result<GossSample, TreeError> {
    if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
        return Err(TreeError::InvalidFraction { a, b });
    }
    let n = grads.len();
    let n_top = (a * n as f64).floor() as usize;
    let n_rest = (b * n as f64).floor() as usize;
    if n_top + n_rest == 0 {
        return Err(TreeError::EmptySample);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        grads[j]
            .abs()
            .total_cmp(&grads[i].abs())
            .then(i.cmp(&j))
    });
    let mut top: Vec<usize> = order[..n_top].to_vec();
    top.sort_unstable();
    let pool = &order[n_top..];

    let mut picked: Vec<usize> = index_sample(rng, pool.len(), n_rest)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    picked.sort_unstable();

    let mut rows = Vec::with_capacity(n_top + n_rest);
    let mut weights = Vec::with_capacity(n_top + n_rest);
    rows.extend_from_slice(&top);
    weights.extend(std::iter::repeat_n(1.0, n_top));
    if n_rest > 0 {
        let w = (1.0 - a) / b;
        rows.extend_from_slice(&picked);
        weights.extend(std::iter::repeat_n(w, n_rest));
    }
    Ok(GossSample { rows, weights })
}
