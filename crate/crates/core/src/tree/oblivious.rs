//! Symmetric (oblivious) trees: every node at a given depth shares one
//! (feature, threshold) condition, so a depth-L tree is a lookup table with
//! 2^L leaves indexed by the L comparison bits.

use super::{leaf_weight, midpoint, split_gain, ColMatrix, DecisionTree, Node};

/// Grow an oblivious tree of at most `depth` levels. Each level picks the
/// (feature, threshold) maximizing the summed three-term gain over all
/// current nodes (nodes whose rows all fall on one side contribute zero).
/// Candidate thresholds are midpoints between consecutive distinct values of
/// the node rows, shared across the level. Growth stops early when the best
/// summed gain minus gamma per effectively split node is not positive.
/// Leaves score -G/(H+lambda); leaves that received no rows score 0.
pub fn build_tree_oblivious(
    m: &ColMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    lambda: f64,
    gamma: f64,
    depth: usize,
) -> DecisionTree {
    let n = rows.len();
    if n < 2 || depth == 0 {
        let (gs, hs) = totals(rows, g, h);
        return DecisionTree::leaf(if n == 0 {
            0.0
        } else {
            leaf_weight(gs, hs, lambda)
        });
    }

    // Positions sorted by value once per feature; levels reuse the order.
    let sorted_per_feature: Vec<Vec<usize>> = features
        .iter()
        .map(|&f| {
            let col = m.col(f);
            let mut pos: Vec<usize> = (0..n).collect();
            pos.sort_by(|&a, &b| col[rows[a]].total_cmp(&col[rows[b]]).then(a.cmp(&b)));
            pos
        })
        .collect();

    let mut node_of = vec![0usize; n];
    let mut levels: Vec<(usize, f64)> = Vec::new();

    for level in 0..depth {
        let n_nodes = 1usize << level;
        // Per-node totals for this level.
        let mut tot_g = vec![0.0; n_nodes];
        let mut tot_h = vec![0.0; n_nodes];
        let mut tot_n = vec![0u32; n_nodes];
        for (pos, &node) in node_of.iter().enumerate() {
            let r = rows[pos];
            tot_g[node] += g[r];
            tot_h[node] += h[r];
            tot_n[node] += 1;
        }

        let mut best: Option<(f64, f64, usize, f64)> = None; // (net, gain, feature, threshold)
        for (rank, &f) in features.iter().enumerate() {
            let col = m.col(f);
            let sorted = &sorted_per_feature[rank];
            let mut cg = vec![0.0; n_nodes];
            let mut ch = vec![0.0; n_nodes];
            let mut cn = vec![0u32; n_nodes];
            let mut contrib = vec![0.0; n_nodes];
            let mut effective = vec![false; n_nodes];
            let mut gain_sum = 0.0;
            let mut n_eff = 0usize;
            for i in 0..n - 1 {
                let pos = sorted[i];
                let r = rows[pos];
                let node = node_of[pos];
                gain_sum -= contrib[node];
                if effective[node] {
                    n_eff -= 1;
                }
                cg[node] += g[r];
                ch[node] += h[r];
                cn[node] += 1;
                if cn[node] < tot_n[node] {
                    contrib[node] = split_gain(
                        cg[node],
                        ch[node],
                        tot_g[node] - cg[node],
                        tot_h[node] - ch[node],
                        lambda,
                    );
                    effective[node] = true;
                    n_eff += 1;
                } else {
                    contrib[node] = 0.0;
                    effective[node] = false;
                }
                gain_sum += contrib[node];

                let v = col[r];
                let next_v = col[rows[sorted[i + 1]]];
                if next_v <= v || n_eff == 0 {
                    continue;
                }
                let net = gain_sum - gamma * n_eff as f64;
                if best.is_none_or(|(bn, ..)| net > bn) {
                    best = Some((net, gain_sum, f, midpoint(v, next_v)));
                }
            }
        }

        let Some((net, _, f, thr)) = best else { break };
        if net <= 0.0 {
            break;
        }
        let col = m.col(f);
        for (pos, node) in node_of.iter_mut().enumerate() {
            *node = *node * 2 + usize::from(col[rows[pos]] > thr);
        }
        levels.push((f, thr));
    }

    if levels.is_empty() {
        let (gs, hs) = totals(rows, g, h);
        return DecisionTree::leaf(leaf_weight(gs, hs, lambda));
    }

    let n_leaves = 1usize << levels.len();
    let mut leaf_g = vec![0.0; n_leaves];
    let mut leaf_h = vec![0.0; n_leaves];
    let mut leaf_n = vec![0u32; n_leaves];
    for (pos, &leaf) in node_of.iter().enumerate() {
        let r = rows[pos];
        leaf_g[leaf] += g[r];
        leaf_h[leaf] += h[r];
        leaf_n[leaf] += 1;
    }
    let weights: Vec<f64> = (0..n_leaves)
        .map(|i| {
            if leaf_n[i] == 0 {
                0.0
            } else {
                leaf_weight(leaf_g[i], leaf_h[i], lambda)
            }
        })
        .collect();

    let mut nodes = Vec::with_capacity(2 * n_leaves - 1);
    materialize(&levels, &weights, 0, 0, &mut nodes);
    DecisionTree { nodes }
}

/// Preorder construction of the full binary tree described by the level
/// conditions; `prefix` carries the comparison bits of the path so far.
fn materialize(
    levels: &[(usize, f64)],
    weights: &[f64],
    level: usize,
    prefix: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let idx = nodes.len() as u32;
    if level == levels.len() {
        nodes.push(Node::Leaf {
            weight: weights[prefix],
        });
        return idx;
    }
    let (feature, threshold) = levels[level];
    nodes.push(Node::Leaf { weight: 0.0 }); // placeholder
    let left = materialize(levels, weights, level + 1, prefix * 2, nodes);
    let right = materialize(levels, weights, level + 1, prefix * 2 + 1, nodes);
    nodes[idx as usize] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    idx
}

fn totals(rows: &[usize], g: &[f64], h: &[f64]) -> (f64, f64) {
    let mut gs = 0.0;
    let mut hs = 0.0;
    for &r in rows {
        gs += g[r];
        hs += h[r];
    }
    (gs, hs)
}
