//! Regression tree learners used inside the boosting loop.
//!
//! Three split-finding strategies ship: exact level-wise enumeration,
//! histogram-based leaf-wise growth (with optional one-sided gradient
//! sampling and exclusive feature bundling), and symmetric (oblivious)
//! trees for the ordered-boosting variant.

mod bundle;
mod exact;
mod goss;
mod histogram;
mod oblivious;
mod ordered;

pub use bundle::{bundle_exclusive_features, Bundle, BundleMap, BundleMember};
pub use exact::{build_tree_levelwise, exact_best_split};
pub use goss::{goss_sample, GossSample};
pub use histogram::{
    best_split_histogram, bin_edges, bin_matrix, build_histograms, build_tree_leafwise, BinEdges,
    FeatureHistogram, HistParams, NodeHistograms,
};
pub use oblivious::build_tree_oblivious;
pub use ordered::{
    fit_inference_encoder, ordered_target_encode, CategoryEncoder, OrderedContext,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("sampling fractions a={a}, b={b} invalid (need a,b >= 0 and a+b <= 1)")]
    InvalidFraction { a: f64, b: f64 },
    #[error("sample would keep zero rows")]
    EmptySample,
}

/// Column-major feature matrix; split finding scans one feature at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    cols: Vec<Vec<f64>>,
    n_rows: usize,
}

impl ColMatrix {
    pub fn new(cols: Vec<Vec<f64>>) -> Self {
        let n_rows = cols.first().map_or(0, |c| c.len());
        assert!(cols.iter().all(|c| c.len() == n_rows));
        ColMatrix { cols, n_rows }
    }

    pub fn from_row_major(x: &[f64], n_features: usize) -> Self {
        assert!(n_features > 0 && x.len() % n_features == 0);
        let n_rows = x.len() / n_features;
        let mut cols = vec![Vec::with_capacity(n_rows); n_features];
        for row in x.chunks_exact(n_features) {
            for (c, &v) in row.iter().enumerate() {
                cols[c].push(v);
            }
        }
        ColMatrix { cols, n_rows }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.cols[j]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.cols[col][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        weight: f64,
    },
}

/// Binary regression tree. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(weight: f64) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Predict a row stored in a column-major matrix without materializing it.
    pub fn predict_at(&self, m: &ColMatrix, row: usize) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if m.value(row, *feature) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Node index of the leaf a matrix row falls into.
    pub fn leaf_slot_at(&self, m: &ColMatrix, row: usize) -> usize {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if m.value(row, *feature) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Best split of one node: raw gain (before the per-leaf penalty) plus the
/// side sums the children inherit.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub g_left: f64,
    pub h_left: f64,
    pub g_right: f64,
    pub h_right: f64,
    pub n_left: usize,
    pub n_right: usize,
}

/// Three-term split gain:
/// G_L^2/(H_L+l) + G_R^2/(H_R+l) - (G_L+G_R)^2/(H_L+H_R+l).
#[inline]
pub fn split_gain(g_l: f64, h_l: f64, g_r: f64, h_r: f64, lambda: f64) -> f64 {
    let g = g_l + g_r;
    let h = h_l + h_r;
    g_l * g_l / (h_l + lambda) + g_r * g_r / (h_r + lambda) - g * g / (h + lambda)
}

/// Optimal constant for a leaf under the second-order objective.
#[inline]
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda: f64) -> f64 {
    -g_sum / (h_sum + lambda)
}

/// Sum in a canonical order so the result is independent of how callers
/// happened to order the rows. Used where a learner promises
/// permutation-invariant output.
pub(crate) fn stable_sum(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values.iter().sum()
}

/// Stable (G, H) over paired grad/hess values; pairs are ordered as a unit so
/// both sums see the same canonical order.
pub(crate) fn stable_sum_gh(pairs: &mut Vec<(f64, f64)>) -> (f64, f64) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut g = 0.0;
    let mut h = 0.0;
    for &(gi, hi) in pairs.iter() {
        g += gi;
        h += hi;
    }
    (g, h)
}

/// Threshold strictly between a and b when one exists, else a itself
/// (`x <= a` still separates a from b).
#[inline]
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    let m = a + (b - a) * 0.5;
    if m > a && m < b {
        m
    } else {
        a
    }
}
