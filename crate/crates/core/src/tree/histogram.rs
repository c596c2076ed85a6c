//! Histogram-based split finding and best-first (leaf-wise) tree growth.
//!
//! Bin edges are fixed once per tree from the root's rows. Each bin covers
//! (edge[b-1], edge[b]]; a candidate split at bin b uses threshold edge[b],
//! so `value <= edge[b]` goes left. When a feature has no more distinct
//! values than `max_bins`, the edges are exactly those values and histogram
//! split finding enumerates the same partitions as the exact method.
//!
//! After a node splits, the histogram of the smaller child is accumulated
//! directly and the larger child's is obtained by subtracting it from the
//! parent, bin by bin.

use super::{
    leaf_weight, split_gain, ColMatrix, DecisionTree, Node, SplitCandidate,
};

/// Per-feature upper-inclusive cut values, strictly increasing. The last edge
/// is the feature maximum over the rows the edges were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges {
    pub per_feature: Vec<Vec<f64>>,
    pub features: Vec<usize>,
}

impl BinEdges {
    fn slot_of(&self, feature: usize) -> usize {
        self.features
            .iter()
            .position(|&f| f == feature)
            .expect("feature has no edges")
    }

    /// Bin index of a value: the smallest b with value <= edge[b]. Values
    /// above the top edge clamp into the last bin (they can only appear at
    /// prediction time, never among the rows the edges came from).
    pub fn bin_of(&self, feature_slot: usize, value: f64) -> usize {
        let edges = &self.per_feature[feature_slot];
        let b = edges.partition_point(|&e| e < value);
        b.min(edges.len() - 1)
    }
}

/// Gradient, hessian and row-count totals per bin for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub count: Vec<u32>,
}

impl FeatureHistogram {
    fn zeros(n_bins: usize) -> Self {
        FeatureHistogram {
            g: vec![0.0; n_bins],
            h: vec![0.0; n_bins],
            count: vec![0; n_bins],
        }
    }

    /// Parent minus child, bin by bin; yields the sibling's histogram.
    pub fn subtract(&self, child: &FeatureHistogram) -> FeatureHistogram {
        let n = self.g.len();
        assert_eq!(child.g.len(), n);
        let mut out = FeatureHistogram::zeros(n);
        for b in 0..n {
            out.g[b] = self.g[b] - child.g[b];
            out.h[b] = self.h[b] - child.h[b];
            out.count[b] = self.count[b] - child.count[b];
        }
        out
    }
}

/// Histograms for every active feature at one node, in `edges.features` order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeHistograms {
    pub feats: Vec<FeatureHistogram>,
}

impl NodeHistograms {
    pub fn subtract(&self, child: &NodeHistograms) -> NodeHistograms {
        NodeHistograms {
            feats: self
                .feats
                .iter()
                .zip(&child.feats)
                .map(|(p, c)| p.subtract(c))
                .collect(),
        }
    }
}

/// Build edges for the given features from the given rows. Features with at
/// most `max_bins` distinct values get one bin per value; denser features get
/// `max_bins` bins cut at evenly spaced ranks of the sorted distinct values.
pub fn bin_edges(m: &ColMatrix, rows: &[usize], features: &[usize], max_bins: usize) -> BinEdges {
    assert!(max_bins >= 2);
    let mut per_feature = Vec::with_capacity(features.len());
    for &f in features {
        let col = m.col(f);
        let mut vals: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        vals.dedup();
        let edges = if vals.len() <= max_bins {
            vals
        } else {
            let n = vals.len();
            let mut edges = Vec::with_capacity(max_bins);
            for j in 1..=max_bins {
                let idx = (j * n).div_ceil(max_bins) - 1;
                edges.push(vals[idx]);
            }
            edges.dedup();
            edges
        };
        per_feature.push(edges);
    }
    BinEdges {
        per_feature,
        features: features.to_vec(),
    }
}

/// Pre-binned copy of the active feature columns: `binned[slot][row]`.
pub fn bin_matrix(m: &ColMatrix, edges: &BinEdges) -> Vec<Vec<u16>> {
    edges
        .features
        .iter()
        .enumerate()
        .map(|(slot, &f)| {
            let col = m.col(f);
            (0..m.n_rows())
                .map(|r| {
                    let b = edges.bin_of(slot, col[r]);
                    debug_assert!(b < u16::MAX as usize);
                    b as u16
                })
                .collect()
        })
        .collect()
}

/// Accumulate per-bin gradient/hessian/count sums over the node's rows.
pub fn build_histograms(
    binned: &[Vec<u16>],
    edges: &BinEdges,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
) -> NodeHistograms {
    let feats = edges
        .per_feature
        .iter()
        .enumerate()
        .map(|(slot, feature_edges)| {
            let mut hist = FeatureHistogram::zeros(feature_edges.len());
            let bins = &binned[slot];
            for &r in rows {
                let b = bins[r] as usize;
                hist.g[b] += g[r];
                hist.h[b] += h[r];
                hist.count[b] += 1;
            }
            hist
        })
        .collect();
    NodeHistograms { feats }
}

/// Scan every bin boundary of every active feature and return the candidate
/// with the highest gain, or None when nothing clears the gamma penalty.
/// `node_g`/`node_h` are the node totals; right-side sums are derived by
/// subtraction so parent-minus-child histograms stay consistent.
pub fn best_split_histogram(
    hists: &NodeHistograms,
    edges: &BinEdges,
    node_g: f64,
    node_h: f64,
    lambda: f64,
    gamma: f64,
) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    for (slot, hist) in hists.feats.iter().enumerate() {
        let feature_edges = &edges.per_feature[slot];
        let n_bins = feature_edges.len();
        if n_bins < 2 {
            continue;
        }
        let total_count: u32 = hist.count.iter().sum();
        let mut acc_g = 0.0;
        let mut acc_h = 0.0;
        let mut acc_n = 0u32;
        for b in 0..n_bins - 1 {
            acc_g += hist.g[b];
            acc_h += hist.h[b];
            acc_n += hist.count[b];
            if acc_n == 0 || acc_n == total_count {
                continue;
            }
            let gain = split_gain(acc_g, acc_h, node_g - acc_g, node_h - acc_h, lambda);
            if best.as_ref().is_none_or(|cur| gain > cur.gain) {
                best = Some(SplitCandidate {
                    feature: edges.features[slot],
                    threshold: feature_edges[b],
                    gain,
                    g_left: acc_g,
                    h_left: acc_h,
                    g_right: node_g - acc_g,
                    h_right: node_h - acc_h,
                    n_left: acc_n as usize,
                    n_right: (total_count - acc_n) as usize,
                });
            }
        }
    }
    best.filter(|b| b.gain - gamma > 0.0)
}

#[derive(Debug, Clone)]
pub struct HistParams {
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub max_bins: usize,
}

struct LeafRecord {
    slot: usize,
    rows: Vec<usize>,
    hists: NodeHistograms,
    g_total: f64,
    h_total: f64,
    depth: usize,
    created: usize,
    best: Option<SplitCandidate>,
}

/// Best-first growth: among all current leaves, split the one whose best
/// candidate has the highest net gain, until `max_leaves` is reached or no
/// leaf can improve. Ties on gain go to the earliest-created leaf. Leaf
/// weights use the tracked node totals, which follow the same
/// cumulative/subtractive arithmetic as the split sums.
pub fn build_tree_leafwise(
    m: &ColMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    p: &HistParams,
) -> DecisionTree {
    assert!(p.max_leaves >= 1);
    let mut nodes: Vec<Node> = vec![Node::Leaf { weight: 0.0 }];
    if rows.len() < 2 || p.max_depth == 0 || p.max_leaves == 1 {
        let (gs, hs) = plain_totals(rows, g, h);
        nodes[0] = Node::Leaf {
            weight: leaf_weight(gs, hs, p.lambda),
        };
        return DecisionTree { nodes };
    }

    let edges = bin_edges(m, rows, features, p.max_bins);
    let binned = bin_matrix(m, &edges);
    let root_hists = build_histograms(&binned, &edges, rows, g, h);
    let (root_g, root_h) = plain_totals(rows, g, h);
    let root_best = best_split_histogram(&root_hists, &edges, root_g, root_h, p.lambda, p.gamma);

    let mut leaves: Vec<LeafRecord> = vec![LeafRecord {
        slot: 0,
        rows: rows.to_vec(),
        hists: root_hists,
        g_total: root_g,
        h_total: root_h,
        depth: 0,
        created: 0,
        best: root_best,
    }];
    let mut created = 1usize;

    while leaves.len() < p.max_leaves {
        let pick = leaves
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.as_ref().map(|b| (i, b.gain, l.created)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(i, _, _)| i);
        let Some(idx) = pick else { break };
        let leaf = leaves.swap_remove(idx);
        let cand = leaf.best.expect("picked leaf has a candidate");

        let slot_in_edges = edges.slot_of(cand.feature);
        let split_bin = edges.per_feature[slot_in_edges]
            .partition_point(|&e| e < cand.threshold)
            .min(edges.per_feature[slot_in_edges].len() - 1);
        debug_assert_eq!(edges.per_feature[slot_in_edges][split_bin], cand.threshold);
        let bins = &binned[slot_in_edges];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = leaf
            .rows
            .iter()
            .partition(|&&r| (bins[r] as usize) <= split_bin);
        debug_assert_eq!(left_rows.len(), cand.n_left);
        debug_assert_eq!(right_rows.len(), cand.n_right);

        // Accumulate the smaller child directly; derive the sibling by
        // subtraction from the parent.
        let (small_rows, small_is_left) = if left_rows.len() <= right_rows.len() {
            (&left_rows, true)
        } else {
            (&right_rows, false)
        };
        let small_hists = build_histograms(&binned, &edges, small_rows, g, h);
        let large_hists = leaf.hists.subtract(&small_hists);
        let (left_hists, right_hists) = if small_is_left {
            (small_hists, large_hists)
        } else {
            (large_hists, small_hists)
        };

        let left_slot = nodes.len();
        nodes.push(Node::Leaf { weight: 0.0 });
        nodes.push(Node::Leaf { weight: 0.0 });
        nodes[leaf.slot] = Node::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            left: left_slot as u32,
            right: left_slot as u32 + 1,
        };

        let depth = leaf.depth + 1;
        let remaining = p.max_leaves - leaves.len() - 1;
        for (slot, child_rows, hists, g_total, h_total) in [
            (left_slot, left_rows, left_hists, cand.g_left, cand.h_left),
            (
                left_slot + 1,
                right_rows,
                right_hists,
                cand.g_right,
                cand.h_right,
            ),
        ] {
            let best = if depth < p.max_depth && child_rows.len() >= 2 && remaining > 0 {
                best_split_histogram(&hists, &edges, g_total, h_total, p.lambda, p.gamma)
            } else {
                None
            };
            leaves.push(LeafRecord {
                slot,
                rows: child_rows,
                hists,
                g_total,
                h_total,
                depth,
                created,
                best,
            });
            created += 1;
        }
    }

    for leaf in leaves {
        nodes[leaf.slot] = Node::Leaf {
            weight: leaf_weight(leaf.g_total, leaf.h_total, p.lambda),
        };
    }
    DecisionTree { nodes }
}

fn plain_totals(rows: &[usize], g: &[f64], h: &[f64]) -> (f64, f64) {
    let mut gs = 0.0;
    let mut hs = 0.0;
    for &r in rows {
        gs += g[r];
        hs += h[r];
    }
    (gs, hs)
}
