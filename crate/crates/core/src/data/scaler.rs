//! MinMax scaling fitted on training data only.
//!
//! x_std = (x - min) / (max - min), then x' = x_std * (up - low) + low.
//! Columns that are constant on the training window map to `low` and are not
//! invertible.

use super::DataError;

/// Per-column ranges plus the shared target interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub low: f64,
    pub up: f64,
}

impl ScalerParams {
    pub fn n_columns(&self) -> usize {
        self.mins.len()
    }

    pub fn is_constant(&self, col: usize) -> bool {
        self.mins[col] == self.maxs[col]
    }
}

/// Fit per-column min/max on the training columns. `bounds` defaults to
/// (0, 1) at call sites; anything with low < up is accepted.
pub fn fit_scaler(train_columns: &[Vec<f64>], bounds: (f64, f64)) -> Result<ScalerParams, DataError> {
    let (low, up) = bounds;
    if !(low < up) || !low.is_finite() || !up.is_finite() {
        return Err(DataError::InvalidBounds(low, up));
    }
    if train_columns.is_empty() || train_columns.iter().any(|c| c.is_empty()) {
        return Err(DataError::EmptyColumn);
    }
    let mut mins = Vec::with_capacity(train_columns.len());
    let mut maxs = Vec::with_capacity(train_columns.len());
    for col in train_columns {
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for &v in col {
            mn = mn.min(v);
            mx = mx.max(v);
        }
        mins.push(mn);
        maxs.push(mx);
    }
    Ok(ScalerParams { mins, maxs, low, up })
}

/// Map columns into the target interval using training ranges. Values outside
/// the training range land outside the interval; constant columns map to
/// `low` everywhere.
pub fn apply_scaler(params: &ScalerParams, columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DataError> {
    if columns.len() != params.n_columns() {
        return Err(DataError::DimensionMismatch {
            expected: params.n_columns(),
            got: columns.len(),
        });
    }
    let span = params.up - params.low;
    let mut out = Vec::with_capacity(columns.len());
    for (c, col) in columns.iter().enumerate() {
        let (mn, mx) = (params.mins[c], params.maxs[c]);
        if mn == mx {
            out.push(vec![params.low; col.len()]);
        } else {
            let range = mx - mn;
            out.push(col.iter().map(|&v| (v - mn) / range * span + params.low).collect());
        }
    }
    Ok(out)
}

/// Undo [`apply_scaler`]. Constant training columns cannot be inverted.
pub fn invert_scaler(params: &ScalerParams, columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DataError> {
    if columns.len() != params.n_columns() {
        return Err(DataError::DimensionMismatch {
            expected: params.n_columns(),
            got: columns.len(),
        });
    }
    let span = params.up - params.low;
    let mut out = Vec::with_capacity(columns.len());
    for (c, col) in columns.iter().enumerate() {
        let (mn, mx) = (params.mins[c], params.maxs[c]);
        if mn == mx {
            return Err(DataError::DegenerateColumn);
        }
        let range = mx - mn;
        out.push(col.iter().map(|&v| (v - params.low) / span * range + mn).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit1(col: &[f64], bounds: (f64, f64)) -> ScalerParams {
        fit_scaler(&[col.to_vec()], bounds).unwrap()
    }

    #[test]
    fn unit_interval_default() {
        let p = fit1(&[0.0, 5.0, 10.0], (0.0, 1.0));
        let scaled = apply_scaler(&p, &[vec![0.0, 5.0, 10.0]]).unwrap();
        assert_eq!(scaled[0], vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn symmetric_bounds() {
        let p = fit1(&[0.0, 5.0, 10.0], (-1.0, 1.0));
        let scaled = apply_scaler(&p, &[vec![0.0, 5.0, 10.0]]).unwrap();
        assert_eq!(scaled[0], vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_low() {
        let p = fit1(&[7.0, 7.0, 7.0], (0.0, 1.0));
        let scaled = apply_scaler(&p, &[vec![7.0, 7.0]]).unwrap();
        assert_eq!(scaled[0], vec![0.0, 0.0]);
    }

    #[test]
    fn constant_column_invert_errors() {
        let p = fit1(&[7.0, 7.0], (0.0, 1.0));
        assert!(matches!(
            invert_scaler(&p, &[vec![0.0]]),
            Err(DataError::DegenerateColumn)
        ));
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(matches!(
            fit_scaler(&[vec![1.0]], (1.0, 1.0)),
            Err(DataError::InvalidBounds(..))
        ));
        assert!(matches!(
            fit_scaler(&[vec![1.0]], (2.0, -2.0)),
            Err(DataError::InvalidBounds(..))
        ));
    }

    #[test]
    fn empty_column_rejected() {
        assert!(matches!(
            fit_scaler(&[vec![]], (0.0, 1.0)),
            Err(DataError::EmptyColumn)
        ));
        assert!(matches!(fit_scaler(&[], (0.0, 1.0)), Err(DataError::EmptyColumn)));
    }

    #[test]
    fn column_count_must_match_params() {
        let p = fit1(&[1.0, 2.0], (0.0, 1.0));
        assert!(matches!(
            apply_scaler(&p, &[vec![1.0], vec![2.0]]),
            Err(DataError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn out_of_range_values_escape_bounds() {
        // Test data may exceed the training range; that is expected, not an error.
        let p = fit1(&[0.0, 10.0], (0.0, 1.0));
        let scaled = apply_scaler(&p, &[vec![-5.0, 15.0]]).unwrap();
        assert_eq!(scaled[0], vec![-0.5, 1.5]);
    }

    #[test]
    fn train_values_stay_in_bounds_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(2..40);
            let scale = 10f64.powi(rng.gen_range(-3..6));
            let col: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() - 0.3) * scale).collect();
            let lo = rng.gen_range(-2.0..0.5);
            let hi = lo + rng.gen_range(0.5..3.0);
            let p = fit1(&col, (lo, hi));
            if p.is_constant(0) {
                continue; // possible only by duplicate draws; not this test's target
            }
            let scaled = apply_scaler(&p, &[col.clone()]).unwrap();
            for &v in &scaled[0] {
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} outside [{lo}, {hi}]");
            }
            let back = invert_scaler(&p, &scaled).unwrap();
            for (&orig, &rt) in col.iter().zip(&back[0]) {
                let tol = 1e-12 * scale.max(1.0);
                assert!((orig - rt).abs() <= tol, "round trip {orig} -> {rt}");
            }
        }
    }
}
