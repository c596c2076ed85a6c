//! The level-wise exact learner and the leaf-wise histogram learner.

use rand_chacha::ChaCha8Rng;

use super::{BoostConfig, BoostError, GradHess, ModelExtras, TreeLearner, Variant};
use crate::data::SupervisedDataset;
use crate::tree::{
    build_tree_leafwise, build_tree_levelwise, bundle_exclusive_features, BundleMap, ColMatrix,
    DecisionTree, HistParams,
};

/// Exact enumeration of every split point, trees grown one full level at a
/// time. The expensive reference learner.
#[derive(Debug, Default)]
pub struct ExactLevelwise {
    fitted: Option<(ColMatrix, BoostConfig)>,
}

impl ExactLevelwise {
    pub fn new() -> Self {
        ExactLevelwise { fitted: None }
    }
}

impl TreeLearner for ExactLevelwise {
    fn begin_fit(
        &mut self,
        ds: &SupervisedDataset,
        cfg: &BoostConfig,
        _rng: &mut ChaCha8Rng,
    ) -> Result<(), BoostError> {
        let matrix = ColMatrix::from_row_major(ds.x(), ds.n_features());
        self.fitted = Some((matrix, cfg.clone()));
        Ok(())
    }

    fn fit_matrix(&self) -> &ColMatrix {
        &self.fitted.as_ref().expect("begin_fit first").0
    }

    fn fit_next(
        &mut self,
        rows: &[usize],
        cols: &[usize],
        gh: &GradHess,
        _rng: &mut ChaCha8Rng,
    ) -> Result<DecisionTree, BoostError> {
        let (matrix, cfg) = self.fitted.as_ref().expect("begin_fit first");
        Ok(build_tree_levelwise(
            matrix,
            rows,
            &gh.g,
            &gh.h,
            cols,
            cfg.lambda,
            cfg.gamma,
            cfg.max_depth,
        ))
    }

    fn extras(&self) -> ModelExtras {
        ModelExtras::default()
    }

    fn variant(&self) -> Variant {
        Variant::LevelwiseExact
    }
}

/// Histogram split finding with best-first growth, optional one-sided
/// gradient sampling, and exclusive feature bundling. Trees index the
/// bundled feature space when bundling finds anything to merge; the bundle
/// map travels with the model so raw rows are re-bundled at prediction time.
#[derive(Debug)]
pub struct HistLeafwise {
    pub max_bins: usize,
    pub max_leaves: usize,
    pub goss: Option<(f64, f64)>,
    pub bundling: bool,
    fitted: Option<HistState>,
}

#[derive(Debug)]
struct HistState {
    matrix: ColMatrix,
    bundles: Option<BundleMap>,
    cfg: BoostConfig,
}

impl HistLeafwise {
    pub fn new(max_bins: usize, max_leaves: usize) -> Self {
        HistLeafwise {
            max_bins,
            max_leaves,
            goss: None,
            bundling: true,
            fitted: None,
        }
    }

    pub fn with_goss(mut self, a: f64, b: f64) -> Self {
        self.goss = Some((a, b));
        self
    }

    pub fn without_bundling(mut self) -> Self {
        self.bundling = false;
        self
    }
}

impl TreeLearner for HistLeafwise {
    fn begin_fit(
        &mut self,
        ds: &SupervisedDataset,
        cfg: &BoostConfig,
        _rng: &mut ChaCha8Rng,
    ) -> Result<(), BoostError> {
        if self.max_bins < 2 {
            return Err(BoostError::InvalidConfig(format!(
                "max_bins {} must be at least 2",
                self.max_bins
            )));
        }
        if self.max_leaves < 1 {
            return Err(BoostError::InvalidConfig("max_leaves must be positive".into()));
        }
        let raw = ColMatrix::from_row_major(ds.x(), ds.n_features());
        let (matrix, bundles) = if self.bundling {
            let map = bundle_exclusive_features(&raw);
            if map.is_identity() {
                (raw, None)
            } else {
                (map.transform_matrix(&raw), Some(map))
            }
        } else {
            (raw, None)
        };
        self.fitted = Some(HistState {
            matrix,
            bundles,
            cfg: cfg.clone(),
        });
        Ok(())
    }

    fn fit_matrix(&self) -> &ColMatrix {
        &self.fitted.as_ref().expect("begin_fit first").matrix
    }

    fn goss_fractions(&self) -> Option<(f64, f64)> {
        self.goss
    }

    fn fit_next(
        &mut self,
        rows: &[usize],
        cols: &[usize],
        gh: &GradHess,
        _rng: &mut ChaCha8Rng,
    ) -> Result<DecisionTree, BoostError> {
        let state = self.fitted.as_ref().expect("begin_fit first");
        let params = HistParams {
            lambda: state.cfg.lambda,
            gamma: state.cfg.gamma,
            max_depth: state.cfg.max_depth,
            max_leaves: self.max_leaves,
            max_bins: self.max_bins,
        };
        Ok(build_tree_leafwise(
            &state.matrix,
            rows,
            &gh.g,
            &gh.h,
            cols,
            &params,
        ))
    }

    fn extras(&self) -> ModelExtras {
        ModelExtras {
            encoders: Vec::new(),
            bundles: self
                .fitted
                .as_ref()
                .and_then(|s| s.bundles.clone()),
        }
    }

    fn variant(&self) -> Variant {
        Variant::LeafwiseHistogram
    }
}
