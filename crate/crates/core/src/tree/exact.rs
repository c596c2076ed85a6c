//! Exact split enumeration and level-wise tree growth.

use std::collections::VecDeque;

use super::{
    leaf_weight, midpoint, split_gain, stable_sum_gh, ColMatrix, DecisionTree, Node,
    SplitCandidate,
};

/// Enumerate every midpoint between consecutive distinct feature values and
/// return the candidate maximizing the three-term gain, or None when no
/// candidate clears the per-split penalty (best gain - gamma <= 0).
///
/// Ties on gain resolve to the lowest feature index, then lowest threshold.
/// Row order does not influence the result: per-feature scans sort rows by
/// (value, g, h) before accumulating, so the floating-point sums are taken in
/// a canonical order.
pub fn exact_best_split(
    m: &ColMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    lambda: f64,
    gamma: f64,
) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let mut best: Option<SplitCandidate> = None;
    let mut triples: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
    for &f in features {
        triples.clear();
        let col = m.col(f);
        for &r in rows {
            triples.push((col[r], g[r], h[r]));
        }
        triples.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });
        let mut total_g = 0.0;
        let mut total_h = 0.0;
        for &(_, gi, hi) in triples.iter() {
            total_g += gi;
            total_h += hi;
        }
        let mut acc_g = 0.0;
        let mut acc_h = 0.0;
        for i in 0..triples.len() - 1 {
            acc_g += triples[i].1;
            acc_h += triples[i].2;
            let (v, next_v) = (triples[i].0, triples[i + 1].0);
            if next_v <= v {
                continue;
            }
            let gain = split_gain(acc_g, acc_h, total_g - acc_g, total_h - acc_h, lambda);
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: midpoint(v, next_v),
                    gain,
                    g_left: acc_g,
                    h_left: acc_h,
                    g_right: total_g - acc_g,
                    h_right: total_h - acc_h,
                    n_left: i + 1,
                    n_right: triples.len() - i - 1,
                });
            }
        }
    }
    best.filter(|b| b.gain - gamma > 0.0)
}

/// Grow a tree breadth-first: every node at the current depth is split (or
/// turned into a leaf) before any node one level deeper is touched. A node
/// becomes a leaf when it reaches `max_depth`, holds fewer than two rows, or
/// no split clears the gamma penalty. Leaf weight is -G/(H+lambda).
pub fn build_tree_levelwise(
    m: &ColMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    lambda: f64,
    gamma: f64,
    max_depth: usize,
) -> DecisionTree {
    let mut nodes: Vec<Node> = vec![Node::Leaf { weight: 0.0 }];
    let mut queue: VecDeque<(usize, Vec<usize>, usize)> = VecDeque::new();
    queue.push_back((0, rows.to_vec(), 0));

    while let Some((slot, node_rows, depth)) = queue.pop_front() {
        let candidate = if depth < max_depth {
            exact_best_split(m, &node_rows, g, h, features, lambda, gamma)
        } else {
            None
        };
        match candidate {
            Some(c) => {
                let col = m.col(c.feature);
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    node_rows.iter().partition(|&&r| col[r] <= c.threshold);
                debug_assert_eq!(left_rows.len(), c.n_left);
                debug_assert_eq!(right_rows.len(), c.n_right);
                let left = nodes.len() as u32;
                let right = left + 1;
                nodes.push(Node::Leaf { weight: 0.0 });
                nodes.push(Node::Leaf { weight: 0.0 });
                nodes[slot] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                queue.push_back((left as usize, left_rows, depth + 1));
                queue.push_back((right as usize, right_rows, depth + 1));
            }
            None => {
                let mut pairs: Vec<(f64, f64)> =
                    node_rows.iter().map(|&r| (g[r], h[r])).collect();
                let (g_sum, h_sum) = stable_sum_gh(&mut pairs);
                nodes[slot] = Node::Leaf {
                    weight: leaf_weight(g_sum, h_sum, lambda),
                };
            }
        }
    }
    DecisionTree { nodes }
}
