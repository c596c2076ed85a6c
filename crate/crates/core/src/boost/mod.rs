//! Gradient boosting: additive stagewise fitting f_t = f_{t-1} + lr * tree_t,
//! where each tree is fit to first/second-order derivatives of the loss at
//! the current predictions.

mod learners;
mod ordered;

pub use learners::{ExactLevelwise, HistLeafwise};
pub use ordered::OrderedOblivious;

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::SupervisedDataset;
use crate::tree::{
    goss_sample, BundleMap, CategoryEncoder, ColMatrix, DecisionTree, TreeError,
};

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid boosting configuration: {0}")]
    InvalidConfig(String),
    #[error("feature count mismatch: model expects {expected}, row has {got}")]
    FeatureCountMismatch { expected: usize, got: usize },
    #[error("gradient sampling failed: {0}")]
    Sampling(#[from] TreeError),
}

/// Hessian used for the absolute loss; the true second derivative is zero,
/// a unit constant keeps -G/(H+lambda) equal to a damped median step.
pub const ABSOLUTE_LOSS_HESSIAN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// 1/2 (pred - y)^2; gradient pred - y, hessian 1.
    Squared,
    /// |pred - y|; gradient sign(pred - y) with sign(0) = 0, constant hessian.
    Absolute,
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Absolute => "absolute",
        }
    }

    /// "rmse" is accepted as an alias for squared loss: the minimizers
    /// coincide and the alias is how the symmetric-tree configuration is
    /// usually written.
    pub fn from_name(name: &str) -> Option<Loss> {
        match name {
            "squared" | "rmse" => Some(Loss::Squared),
            "absolute" => Some(Loss::Absolute),
            _ => None,
        }
    }

    #[inline]
    pub fn grad(&self, pred: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => pred - y,
            Loss::Absolute => {
                let d = pred - y;
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub fn hess(&self) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Absolute => ABSOLUTE_LOSS_HESSIAN,
        }
    }
}

/// Per-row first and second derivatives of the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn compute_grad_hess(loss: Loss, preds: &[f64], y: &[f64]) -> GradHess {
    assert_eq!(preds.len(), y.len());
    let g = preds
        .iter()
        .zip(y)
        .map(|(&p, &t)| loss.grad(p, t))
        .collect();
    let h = vec![loss.hess(); y.len()];
    GradHess { g, h }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    pub loss: Loss,
    pub learning_rate: f64,
    pub n_trees: usize,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            loss: Loss::Squared,
            learning_rate: 0.1,
            n_trees: 100,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), BoostError> {
        let bad = |msg: String| Err(BoostError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} not in (0, inf)", self.learning_rate));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample {} not in (0, 1]", self.subsample));
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad(format!(
                "colsample_bytree {} not in (0, 1]",
                self.colsample_bytree
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be >= 0", self.gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    LevelwiseExact,
    LeafwiseHistogram,
    ObliviousOrdered,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::LevelwiseExact => "levelwise_exact",
            Variant::LeafwiseHistogram => "leafwise_histogram",
            Variant::ObliviousOrdered => "oblivious_ordered",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        match name {
            "levelwise_exact" => Some(Variant::LevelwiseExact),
            "leafwise_histogram" => Some(Variant::LeafwiseHistogram),
            "oblivious_ordered" => Some(Variant::ObliviousOrdered),
            _ => None,
        }
    }
}

/// Pieces a fitted learner hands the ensemble so raw rows can be predicted:
/// categorical encoders applied first, then the feature bundling map.
#[derive(Debug, Clone, Default)]
pub struct ModelExtras {
    pub encoders: Vec<CategoryEncoder>,
    pub bundles: Option<BundleMap>,
}

/// A split-finding strategy plugged into the boosting loop. `begin_fit`
/// prepares the learner's view of the data (raw, bundled or encoded);
/// `fit_matrix` exposes that view so the loop can track running predictions;
/// `fit_next` grows one tree. Trees index features of the fit matrix.
pub trait TreeLearner {
    fn begin_fit(
        &mut self,
        ds: &SupervisedDataset,
        cfg: &BoostConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), BoostError>;

    fn fit_matrix(&self) -> &ColMatrix;

    /// Gradient sampling fractions (a, b) when the learner wants one-sided
    /// sampling instead of uniform row subsampling.
    fn goss_fractions(&self) -> Option<(f64, f64)> {
        None
    }

    /// Grow one tree on the given rows and feature columns. `gh` holds the
    /// loss derivatives at the ensemble's current predictions; learners that
    /// maintain their own residual bookkeeping may ignore it.
    fn fit_next(
        &mut self,
        rows: &[usize],
        cols: &[usize],
        gh: &GradHess,
        rng: &mut ChaCha8Rng,
    ) -> Result<DecisionTree, BoostError>;

    fn extras(&self) -> ModelExtras;

    fn variant(&self) -> Variant;
}

/// Boosted tree model over raw feature rows.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub variant: Variant,
    pub base_score: f64,
    pub learning_rate: f64,
    /// Width of a raw input row.
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
    pub encoders: Vec<CategoryEncoder>,
    pub bundles: Option<BundleMap>,
}

impl Ensemble {
    /// base + lr * sum of tree outputs, applied in tree order.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64, BoostError> {
        if row.len() != self.n_features {
            return Err(BoostError::FeatureCountMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let prepared = self.prepare_row(row);
        let mut acc = self.base_score;
        for tree in &self.trees {
            acc += self.learning_rate * tree.predict_row(&prepared);
        }
        Ok(acc)
    }

    pub fn predict_dataset(&self, ds: &SupervisedDataset) -> Result<Vec<f64>, BoostError> {
        (0..ds.n_rows()).map(|i| self.predict_row(ds.row(i))).collect()
    }

    fn prepare_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = row.to_vec();
        for enc in &self.encoders {
            out[enc.slot] = enc.encode(row[enc.slot]);
        }
        match &self.bundles {
            Some(map) if !map.is_identity() => map.transform_row(&out),
            _ => out,
        }
    }
}

/// Mean with summands sorted first, so the result does not depend on row
/// order.
pub(crate) fn stable_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    crate::tree::stable_sum(&mut v) / values.len() as f64
}

/// Run the boosting loop: start from the mean target, then repeatedly
/// compute loss derivatives, sample rows (uniformly, or one-sided when the
/// learner asks for it) and feature columns, and add the learner's tree.
pub fn boost_fit(
    ds: &SupervisedDataset,
    cfg: &BoostConfig,
    learner: &mut dyn TreeLearner,
) -> Result<Ensemble, BoostError> {
    cfg.validate()?;
    let n = ds.n_rows();
    if n == 0 {
        return Err(BoostError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    learner.begin_fit(ds, cfg, &mut rng)?;

    let y = ds.y();
    let base_score = stable_mean(y);
    let mut preds = vec![base_score; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let n_fit_cols = learner.fit_matrix().n_cols();

    for _ in 0..cfg.n_trees {
        let gh = compute_grad_hess(cfg.loss, &preds, y);

        let (rows, gh_used) = match learner.goss_fractions() {
            Some((a, b)) => {
                let s = goss_sample(&gh.g, a, b, &mut rng)?;
                let mut g = vec![0.0; n];
                let mut h = vec![0.0; n];
                for (&r, &w) in s.rows.iter().zip(&s.weights) {
                    g[r] = w * gh.g[r];
                    h[r] = w * gh.h[r];
                }
                (s.rows, GradHess { g, h })
            }
            None if cfg.subsample < 1.0 => {
                let k = ((cfg.subsample * n as f64).floor() as usize).max(1);
                let mut rows: Vec<usize> = index_sample(&mut rng, n, k).into_iter().collect();
                rows.sort_unstable();
                (rows, gh)
            }
            None => ((0..n).collect(), gh),
        };

        let cols = if cfg.colsample_bytree < 1.0 {
            let k = ((cfg.colsample_bytree * n_fit_cols as f64).floor() as usize).max(1);
            let mut cols: Vec<usize> =
                index_sample(&mut rng, n_fit_cols, k).into_iter().collect();
            cols.sort_unstable();
            cols
        } else {
            (0..n_fit_cols).collect()
        };

        let tree = learner.fit_next(&rows, &cols, &gh_used, &mut rng)?;
        let matrix = learner.fit_matrix();
        for (i, p) in preds.iter_mut().enumerate() {
            *p += cfg.learning_rate * tree.predict_at(matrix, i);
        }
        trees.push(tree);
    }

    let extras = learner.extras();
    Ok(Ensemble {
        variant: learner.variant(),
        base_score,
        learning_rate: cfg.learning_rate,
        n_features: ds.n_features(),
        trees,
        encoders: extras.encoders,
        bundles: extras.bundles,
    })
}

/// Level-wise exact configuration mirroring a common depth-wise booster
/// setup: squared loss, 300 trees of depth 10, learning rate 0.01, row
/// subsample 0.8, column subsample 0.9, L2 strength 1.
pub fn preset_levelwise_exact(seed: u64) -> (BoostConfig, ExactLevelwise) {
    (
        BoostConfig {
            loss: Loss::Squared,
            learning_rate: 0.01,
            n_trees: 300,
            max_depth: 10,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 0.8,
            colsample_bytree: 0.9,
            seed,
        },
        ExactLevelwise::new(),
    )
}

/// Leaf-wise histogram configuration: same boosting schedule, no explicit L2,
/// 255 bins, 31 leaves, feature bundling on, uniform row subsampling.
pub fn preset_leafwise_histogram(seed: u64) -> (BoostConfig, HistLeafwise) {
    (
        BoostConfig {
            loss: Loss::Squared,
            learning_rate: 0.01,
            n_trees: 300,
            max_depth: 10,
            lambda: 0.0,
            gamma: 0.0,
            subsample: 0.8,
            colsample_bytree: 0.9,
            seed,
        },
        HistLeafwise::new(255, 31),
    )
}

/// Symmetric-tree ordered configuration: squared ("rmse") loss, 500
/// iterations of depth 10, learning rate 0.01, L2 strength 3, prior 0.5 with
/// unit prior strength.
pub fn preset_oblivious_ordered(seed: u64) -> (BoostConfig, OrderedOblivious) {
    (
        BoostConfig {
            loss: Loss::Squared,
            learning_rate: 0.01,
            n_trees: 500,
            max_depth: 10,
            lambda: 3.0,
            gamma: 0.0,
            subsample: 0.8,
            colsample_bytree: 1.0,
            seed,
        },
        OrderedOblivious::new(0.5, 1.0),
    )
}
