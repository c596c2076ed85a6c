//! Ordered boosting on symmetric trees.
//!
//! A fixed random permutation orders the training rows. The residual a row
//! contributes at iteration t is computed against a helper model that was
//! trained only on rows strictly earlier in the permutation, so a row's own
//! target never influences the predictions its gradient is based on. Helper
//! models are kept for prefix lengths on a doubling schedule (1, 2, 4, ...);
//! the row at position p uses the largest prefix not exceeding p, and the
//! first row falls back to the prior. Each helper is a plain boosted
//! ensemble of symmetric trees over its prefix rows, advanced by one tree
//! whenever the main model gains one, so helper and main model always have
//! equal depth in iterations.
//!
//! The ordered residuals pick each tree's structure. Leaf values are then
//! refit from the residuals of the ensemble being assembled: ordered
//! residuals never see the main model, so fitting values to them directly
//! has no feedback and keeps stacking their noise floor tree after tree
//! (early permutation positions are scored by near-empty prefixes and never
//! converge). Refit values restore the usual boosting contraction while the
//! split decisions stay leak-free.
//!
//! Categorical slots are replaced up front with ordered target statistics
//! under the same permutation; the fitted model carries full-training-set
//! encoders for prediction time.

use rand_chacha::ChaCha8Rng;

use super::{BoostConfig, BoostError, GradHess, ModelExtras, TreeLearner, Variant};
use crate::data::SupervisedDataset;
use crate::tree::{
    build_tree_oblivious, fit_inference_encoder, leaf_weight, ordered_target_encode,
    CategoryEncoder, ColMatrix, DecisionTree, Node, OrderedContext,
};

#[derive(Debug)]
pub struct OrderedOblivious {
    pub prior: f64,
    pub strength: f64,
    /// Train a helper model at every prefix length instead of the doubling
    /// schedule. Quadratic cost; meant for small data and oracle tests.
    pub unit_schedule: bool,
    context_override: Option<OrderedContext>,
    fitted: Option<OrderedState>,
}

#[derive(Debug)]
struct OrderedState {
    matrix: ColMatrix,
    y: Vec<f64>,
    cfg: BoostConfig,
    ctx: OrderedContext,
    encoders: Vec<CategoryEncoder>,
    prefixes: Vec<PrefixModel>,
}

/// One helper model: a boosted ensemble over the first `rows.len()` rows of
/// the permutation. `preds` holds its current prediction for every position
/// below `limit` (its own training positions plus the positions it serves).
#[derive(Debug)]
struct PrefixModel {
    rows: Vec<usize>,
    limit: usize,
    preds: Vec<f64>,
}

impl OrderedOblivious {
    pub fn new(prior: f64, strength: f64) -> Self {
        OrderedOblivious {
            prior,
            strength,
            unit_schedule: false,
            context_override: None,
            fitted: None,
        }
    }

    /// Use an explicit permutation/schedule instead of drawing one.
    pub fn with_context(mut self, ctx: OrderedContext) -> Self {
        self.prior = ctx.prior;
        self.strength = ctx.strength;
        self.context_override = Some(ctx);
        self
    }

    pub fn with_unit_schedule(mut self) -> Self {
        self.unit_schedule = true;
        self
    }

    /// Current helper-model prediction for each row (the value the row's
    /// next residual would be measured against). Row k's value never depends
    /// on y_k.
    pub fn prefix_prediction_by_row(&self) -> Vec<f64> {
        let state = self.fitted.as_ref().expect("begin_fit first");
        let n = state.ctx.perm.len();
        let mut out = vec![0.0; n];
        for pos in 0..n {
            out[state.ctx.perm[pos]] = prediction_at_position(state, pos);
        }
        out
    }
}

/// Replace each leaf weight with -G/(H+lambda) accumulated from `gh` over
/// the rows that reach it. Rows are folded in slice order; empty leaves
/// keep weight zero.
fn refit_leaves(tree: &mut DecisionTree, m: &ColMatrix, rows: &[usize], gh: &GradHess, lambda: f64) {
    let mut sums = vec![(0.0f64, 0.0f64); tree.nodes.len()];
    for &r in rows {
        let slot = tree.leaf_slot_at(m, r);
        sums[slot].0 += gh.g[r];
        sums[slot].1 += gh.h[r];
    }
    for (slot, node) in tree.nodes.iter_mut().enumerate() {
        if let Node::Leaf { weight } = node {
            let (g, h) = sums[slot];
            *weight = if h > 0.0 { leaf_weight(g, h, lambda) } else { 0.0 };
        }
    }
}

fn prediction_at_position(state: &OrderedState, pos: usize) -> f64 {
    match state.ctx.prefix_for(pos) {
        None => state.ctx.prior,
        Some(m) => {
            let idx = state
                .ctx
                .schedule
                .binary_search(&m)
                .expect("schedule entry");
            state.prefixes[idx].preds[pos]
        }
    }
}

impl TreeLearner for OrderedOblivious {
    fn begin_fit(
        &mut self,
        ds: &SupervisedDataset,
        cfg: &BoostConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), BoostError> {
        if !(self.strength > 0.0) {
            return Err(BoostError::InvalidConfig(format!(
                "prior strength {} must be positive",
                self.strength
            )));
        }
        let n = ds.n_rows();
        let mut ctx = match &self.context_override {
            Some(c) => {
                if c.perm.len() != n {
                    return Err(BoostError::InvalidConfig(format!(
                        "permutation length {} does not match {} rows",
                        c.perm.len(),
                        n
                    )));
                }
                c.clone()
            }
            None => OrderedContext::new_seeded(n, self.prior, self.strength, rng),
        };
        if self.unit_schedule {
            ctx.schedule = (1..n).collect();
        }

        let mut matrix = ColMatrix::from_row_major(ds.x(), ds.n_features());
        let mut encoders = Vec::new();
        for &slot in ds.categorical_slots() {
            let raw_col = matrix.col(slot).to_vec();
            let encoded = ordered_target_encode(&raw_col, ds.y(), &ctx);
            matrix.col_mut(slot).copy_from_slice(&encoded);
            encoders.push(fit_inference_encoder(
                slot,
                &raw_col,
                ds.y(),
                self.prior,
                self.strength,
            ));
        }

        let y = ds.y().to_vec();
        let prefixes = ctx
            .schedule
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let limit = ctx.schedule.get(i + 1).copied().unwrap_or(n);
                let rows: Vec<usize> = ctx.perm[..m].to_vec();
                let mut base = 0.0;
                for &r in &rows {
                    base += y[r];
                }
                base /= m as f64;
                PrefixModel {
                    rows,
                    limit,
                    preds: vec![base; limit],
                }
            })
            .collect();

        self.fitted = Some(OrderedState {
            matrix,
            y,
            cfg: cfg.clone(),
            ctx,
            encoders,
            prefixes,
        });
        Ok(())
    }

    fn fit_matrix(&self) -> &ColMatrix {
        &self.fitted.as_ref().expect("begin_fit first").matrix
    }

    fn fit_next(
        &mut self,
        rows: &[usize],
        cols: &[usize],
        gh: &GradHess,
        _rng: &mut ChaCha8Rng,
    ) -> Result<DecisionTree, BoostError> {
        let state = self.fitted.as_mut().expect("begin_fit first");
        let n = state.ctx.perm.len();
        let loss = state.cfg.loss;

        // Leave-future-out residuals: each row scored against its prefix model.
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for pos in 0..n {
            let row = state.ctx.perm[pos];
            let pred = prediction_at_position(state, pos);
            g[row] = loss.grad(pred, state.y[row]);
            h[row] = loss.hess();
        }
        let mut tree = build_tree_oblivious(
            &state.matrix,
            rows,
            &g,
            &h,
            cols,
            state.cfg.lambda,
            state.cfg.gamma,
            state.cfg.max_depth,
        );
        refit_leaves(&mut tree, &state.matrix, rows, gh, state.cfg.lambda);

        // Advance every helper model by one tree of its own, fit to its own
        // residuals on its own prefix rows.
        let mut g2 = vec![0.0; n];
        let mut h2 = vec![0.0; n];
        for p in &mut state.prefixes {
            for (pos, &row) in state.ctx.perm[..p.rows.len()].iter().enumerate() {
                g2[row] = loss.grad(p.preds[pos], state.y[row]);
                h2[row] = loss.hess();
            }
            let helper = build_tree_oblivious(
                &state.matrix,
                &p.rows,
                &g2,
                &h2,
                cols,
                state.cfg.lambda,
                state.cfg.gamma,
                state.cfg.max_depth,
            );
            for pos in 0..p.limit {
                p.preds[pos] +=
                    state.cfg.learning_rate * helper.predict_at(&state.matrix, state.ctx.perm[pos]);
            }
        }

        Ok(tree)
    }

    fn extras(&self) -> ModelExtras {
        ModelExtras {
            encoders: self
                .fitted
                .as_ref()
                .map(|s| s.encoders.clone())
                .unwrap_or_default(),
            bundles: None,
        }
    }

    fn variant(&self) -> Variant {
        Variant::ObliviousOrdered
    }
}

#[cfg(test)]
mod tests {
    use super::super::{boost_fit, compute_grad_hess, stable_mean, BoostConfig, Loss};
    use super::*;
    use chrono::{DateTime, Utc};
    use rand::{Rng, SeedableRng};

    fn dataset_with_categorical(n: usize, seed: u64) -> SupervisedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n * 3);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let c = rng.gen_range(0i32..3) as f64;
            x.extend_from_slice(&[a, b, c]);
            y.push(2.0 * a - b + c * 0.5 + rng.gen_range(-0.05..0.05));
        }
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let epoch = DateTime::<Utc>::from_timestamp(0, 0).unwrap();
        let times = (0..n as i64).map(|i| epoch + chrono::Duration::hours(i)).collect();
        SupervisedDataset::from_parts(x, y, 3, 0, names, vec![2], times)
    }

    /// Train a plain boosted symmetric-tree model from scratch on the first
    /// k permutation rows and return its prediction for position k.
    #[allow(clippy::too_many_arguments)]
    fn from_scratch_prefix_pred(
        matrix: &ColMatrix,
        y: &[f64],
        perm: &[usize],
        k: usize,
        t_trees: usize,
        cfg: &BoostConfig,
        features: &[usize],
    ) -> f64 {
        let rows: Vec<usize> = perm[..k].to_vec();
        let mut base = 0.0;
        for &r in &rows {
            base += y[r];
        }
        base /= k as f64;
        let mut preds = vec![base; k];
        let mut target_pred = base;
        let n_all = y.len();
        for _ in 0..t_trees {
            let mut g = vec![0.0; n_all];
            let mut h = vec![0.0; n_all];
            for (pos, &r) in rows.iter().enumerate() {
                g[r] = cfg.loss.grad(preds[pos], y[r]);
                h[r] = cfg.loss.hess();
            }
            let tree = build_tree_oblivious(
                matrix,
                &rows,
                &g,
                &h,
                features,
                cfg.lambda,
                cfg.gamma,
                cfg.max_depth,
            );
            for (pos, &r) in rows.iter().enumerate() {
                preds[pos] += cfg.learning_rate * tree.predict_at(matrix, r);
            }
            target_pred += cfg.learning_rate * tree.predict_at(matrix, perm[k]);
        }
        target_pred
    }

    #[test]
    fn unit_schedule_matches_from_scratch_prefix_retraining() {
        let n = 10;
        let ds = dataset_with_categorical(n, 31);
        let perm = vec![3, 7, 1, 9, 0, 5, 2, 8, 4, 6];
        let ctx = OrderedContext::with_unit_schedule(perm.clone(), 0.5, 1.0);
        let cfg = BoostConfig {
            loss: Loss::Squared,
            learning_rate: 0.25,
            n_trees: 4,
            max_depth: 2,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            seed: 9,
        };
        let mut learner = OrderedOblivious::new(0.5, 1.0).with_context(ctx.clone());
        let model = boost_fit(&ds, &cfg, &mut learner).unwrap();

        // Rebuild the encoded matrix and replay the main loop, computing
        // every prefix prediction by retraining from scratch.
        let mut matrix = ColMatrix::from_row_major(ds.x(), 3);
        let raw_cat = matrix.col(2).to_vec();
        let encoded = ordered_target_encode(&raw_cat, ds.y(), &ctx);
        matrix.col_mut(2).copy_from_slice(&encoded);
        let y = ds.y();
        let all_rows: Vec<usize> = (0..n).collect();
        let features = vec![0, 1, 2];
        let mut main_preds = vec![stable_mean(y); n];
        let mut oracle_trees = Vec::new();
        for t in 0..cfg.n_trees {
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n];
            for (pos, &row) in perm.iter().enumerate() {
                let pred = if pos == 0 {
                    0.5
                } else {
                    from_scratch_prefix_pred(&matrix, y, &perm, pos, t, &cfg, &features)
                };
                g[row] = cfg.loss.grad(pred, y[row]);
                h[row] = cfg.loss.hess();
            }
            let mut tree = build_tree_oblivious(
                &matrix,
                &all_rows,
                &g,
                &h,
                &features,
                cfg.lambda,
                cfg.gamma,
                cfg.max_depth,
            );
            let gh = compute_grad_hess(cfg.loss, &main_preds, y);
            refit_leaves(&mut tree, &matrix, &all_rows, &gh, cfg.lambda);
            for r in 0..n {
                main_preds[r] += cfg.learning_rate * tree.predict_at(&matrix, r);
            }
            oracle_trees.push(tree);
        }
        assert_eq!(model.trees, oracle_trees);
    }

    #[test]
    fn doubling_schedule_serves_each_position_from_its_prefix() {
        let n = 16;
        let ds = dataset_with_categorical(n, 7);
        let cfg = BoostConfig {
            n_trees: 3,
            max_depth: 2,
            learning_rate: 0.3,
            subsample: 1.0,
            colsample_bytree: 1.0,
            seed: 5,
            ..BoostConfig::default()
        };
        let mut learner = OrderedOblivious::new(0.5, 1.0);
        boost_fit(&ds, &cfg, &mut learner).unwrap();
        let state = learner.fitted.as_ref().unwrap();
        assert_eq!(state.ctx.schedule, vec![1, 2, 4, 8]);
        // helper for prefix m serves positions m..next and trains on m rows
        assert_eq!(state.prefixes[0].rows.len(), 1);
        assert_eq!(state.prefixes[0].limit, 2);
        assert_eq!(state.prefixes[3].rows.len(), 8);
        assert_eq!(state.prefixes[3].limit, 16);
    }

    #[test]
    fn prefix_predictions_ignore_the_rows_own_target() {
        let n = 24;
        let ds = dataset_with_categorical(n, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ctx = OrderedContext::new_seeded(n, 0.5, 1.0, &mut rng);
        let cfg = BoostConfig {
            n_trees: 5,
            max_depth: 2,
            learning_rate: 0.2,
            subsample: 1.0,
            colsample_bytree: 1.0,
            seed: 77,
            ..BoostConfig::default()
        };
        let mut base_learner = OrderedOblivious::new(0.5, 1.0).with_context(ctx.clone());
        boost_fit(&ds, &cfg, &mut base_learner).unwrap();
        let base_preds = base_learner.prefix_prediction_by_row();

        for k in [0usize, 5, 11, 23] {
            let mut y2 = ds.y().to_vec();
            y2[k] += 500.0;
            let bumped = ds.with_values(ds.x().to_vec(), y2);
            let mut learner = OrderedOblivious::new(0.5, 1.0).with_context(ctx.clone());
            boost_fit(&bumped, &cfg, &mut learner).unwrap();
            let preds = learner.prefix_prediction_by_row();
            assert_eq!(
                preds[k].to_bits(),
                base_preds[k].to_bits(),
                "row {k}: prefix prediction moved when its own target changed"
            );
        }
    }

    #[test]
    fn ordered_fit_improves_over_the_mean_predictor() {
        let n = 200;
        let ds = dataset_with_categorical(n, 99);
        let cfg = BoostConfig {
            n_trees: 60,
            max_depth: 3,
            learning_rate: 0.15,
            lambda: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            seed: 21,
            ..BoostConfig::default()
        };
        let model = boost_fit(&ds, &cfg, &mut OrderedOblivious::new(0.5, 1.0)).unwrap();
        let preds = model.predict_dataset(&ds).unwrap();
        let y = ds.y();
        let sse: f64 = preds.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
        let base_sse: f64 = y
            .iter()
            .map(|t| (model.base_score - t) * (model.base_score - t))
            .sum();
        assert!(sse < 0.3 * base_sse, "sse {sse} vs baseline {base_sse}");
        assert_eq!(model.encoders.len(), 1);
        assert_eq!(model.encoders[0].slot, 2);
    }

    #[test]
    fn same_seed_is_bitwise_reproducible_and_seed_changes_the_model() {
        let ds = dataset_with_categorical(64, 1);
        let cfg = BoostConfig {
            n_trees: 6,
            max_depth: 2,
            subsample: 0.8,
            seed: 40,
            ..BoostConfig::default()
        };
        let a = boost_fit(&ds, &cfg, &mut OrderedOblivious::new(0.5, 1.0)).unwrap();
        let b = boost_fit(&ds, &cfg, &mut OrderedOblivious::new(0.5, 1.0)).unwrap();
        assert_eq!(a.trees, b.trees);
        let mut cfg2 = cfg.clone();
        cfg2.seed = 41;
        let c = boost_fit(&ds, &cfg2, &mut OrderedOblivious::new(0.5, 1.0)).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn categorical_test_rows_use_full_training_statistics() {
        let ds = dataset_with_categorical(48, 17);
        let cfg = BoostConfig {
            n_trees: 4,
            max_depth: 2,
            subsample: 1.0,
            colsample_bytree: 1.0,
            ..BoostConfig::default()
        };
        let model = boost_fit(&ds, &cfg, &mut OrderedOblivious::new(0.5, 1.0)).unwrap();
        // predicting an unseen category value must fall back to the prior
        // encoding rather than failing
        let mut row = ds.row(0).to_vec();
        row[2] = 99.0;
        let p = model.predict_row(&row).unwrap();
        assert!(p.is_finite());
        // encoder agrees with a direct computation for a seen value
        let enc = &model.encoders[0];
        let col = ds.feature_column(2);
        let y = ds.y();
        let (mut sum, mut count) = (0.0, 0.0);
        for (v, t) in col.iter().zip(y) {
            if *v == 1.0 {
                sum += t;
                count += 1.0;
            }
        }
        let expect = (sum + 1.0 * 0.5) / (count + 1.0);
        assert!((enc.encode(1.0) - expect).abs() < 1e-12);
    }
}
