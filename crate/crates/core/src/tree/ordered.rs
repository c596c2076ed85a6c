//! Ordered statistics for categorical features and the permutation context
//! shared with ordered boosting.
//!
//! A categorical value is replaced by a smoothed mean of the target over the
//! rows that precede it in a fixed random permutation:
//!
//!   enc(i) = (sum of y over earlier rows with the same value + a * p)
//!            / (count of earlier rows with the same value + a)
//!
//! so row i's own target never feeds its own encoding. At inference time the
//! same statistic is taken over the whole training set.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Fixed permutation plus the prefix schedule ordered boosting trains its
/// helper models on. `schedule` holds prefix lengths, ascending; the empty
/// prefix (length 0) is implicit and predicts the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedContext {
    pub perm: Vec<usize>,
    pub prior: f64,
    pub strength: f64,
    pub schedule: Vec<usize>,
}

impl OrderedContext {
    /// Random permutation with the exponential prefix schedule 1, 2, 4, ...
    pub fn new_seeded(n: usize, prior: f64, strength: f64, rng: &mut ChaCha8Rng) -> Self {
        assert!(strength > 0.0, "prior strength must be positive");
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        OrderedContext {
            perm,
            prior,
            strength,
            schedule: Self::exponential_schedule(n),
        }
    }

    /// Explicit permutation with a prefix model at every length 1..n-1;
    /// position k then trains against exactly its first k rows. Meant for
    /// small data and brute-force comparisons.
    pub fn with_unit_schedule(perm: Vec<usize>, prior: f64, strength: f64) -> Self {
        assert!(strength > 0.0, "prior strength must be positive");
        let n = perm.len();
        OrderedContext {
            perm,
            prior,
            strength,
            schedule: (1..n).collect(),
        }
    }

    /// Prefix lengths 1, 2, 4, ... strictly below n.
    pub fn exponential_schedule(n: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut m = 1usize;
        while m < n {
            out.push(m);
            m *= 2;
        }
        out
    }

    /// Largest scheduled prefix length not exceeding `pos`, or None for the
    /// empty prefix.
    pub fn prefix_for(&self, pos: usize) -> Option<usize> {
        match self.schedule.partition_point(|&m| m <= pos) {
            0 => None,
            i => Some(self.schedule[i - 1]),
        }
    }
}

/// Encode one categorical column using only past rows in permutation order.
/// Values are matched bitwise, which is exact for the calendar codes this is
/// used on. Output is indexed by row, like the input.
pub fn ordered_target_encode(values: &[f64], targets: &[f64], ctx: &OrderedContext) -> Vec<f64> {
    assert_eq!(values.len(), targets.len());
    assert_eq!(values.len(), ctx.perm.len());
    let mut stats: HashMap<u64, (f64, f64)> = HashMap::new();
    let mut out = vec![0.0; values.len()];
    for &row in &ctx.perm {
        let key = values[row].to_bits();
        let (sum, count) = stats.get(&key).copied().unwrap_or((0.0, 0.0));
        out[row] = (sum + ctx.strength * ctx.prior) / (count + ctx.strength);
        let e = stats.entry(key).or_insert((0.0, 0.0));
        e.0 += targets[row];
        e.1 += 1.0;
    }
    out
}

/// Full-training-set encoding table for one categorical slot, carried by the
/// fitted model so test rows see the statistics of everything that was
/// trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEncoder {
    pub slot: usize,
    pub prior: f64,
    pub strength: f64,
    /// (raw value, encoded value), sorted by the raw value's bit pattern.
    pub entries: Vec<(f64, f64)>,
}

impl CategoryEncoder {
    pub fn encode(&self, value: f64) -> f64 {
        let key = value.to_bits();
        match self
            .entries
            .binary_search_by(|(v, _)| v.to_bits().cmp(&key))
        {
            Ok(i) => self.entries[i].1,
            Err(_) => self.prior,
        }
    }
}

/// Fit the inference-time encoder: every distinct value maps to
/// (sum_y + a*p) / (count + a) over all rows; unseen values fall back to p.
pub fn fit_inference_encoder(
    slot: usize,
    values: &[f64],
    targets: &[f64],
    prior: f64,
    strength: f64,
) -> CategoryEncoder {
    assert!(strength > 0.0, "prior strength must be positive");
    assert_eq!(values.len(), targets.len());
    let mut stats: HashMap<u64, (f64, f64)> = HashMap::new();
    for (v, y) in values.iter().zip(targets) {
        let e = stats.entry(v.to_bits()).or_insert((0.0, 0.0));
        e.0 += y;
        e.1 += 1.0;
    }
    let mut entries: Vec<(f64, f64)> = stats
        .into_iter()
        .map(|(bits, (sum, count))| {
            (
                f64::from_bits(bits),
                (sum + strength * prior) / (count + strength),
            )
        })
        .collect();
    entries.sort_by_key(|(v, _)| v.to_bits());
    CategoryEncoder {
        slot,
        prior,
        strength,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identity_permutation_walks_prefix_statistics() {
        // values [A, A, B, A], targets [2, 4, 10, 6], prior 0.5, strength 1.
        let ctx = OrderedContext::with_unit_schedule(vec![0, 1, 2, 3], 0.5, 1.0);
        let enc = ordered_target_encode(&[7.0, 7.0, 9.0, 7.0], &[2.0, 4.0, 10.0, 6.0], &ctx);
        assert_eq!(enc[0], 0.5); // nothing before it: (0 + 1*0.5)/(0 + 1)
        assert_eq!(enc[1], (2.0 + 0.5) / 2.0); // one A with y=2 before
        assert_eq!(enc[2], 0.5); // first B
        assert_eq!(enc[3], (6.0 + 0.5) / 3.0); // two A with y=2,4 before
    }

    #[test]
    fn permutation_changes_which_rows_count_as_past() {
        let ctx = OrderedContext::with_unit_schedule(vec![3, 2, 1, 0], 0.5, 1.0);
        let enc = ordered_target_encode(&[7.0, 7.0, 9.0, 7.0], &[2.0, 4.0, 10.0, 6.0], &ctx);
        assert_eq!(enc[3], 0.5); // now first in order
        assert_eq!(enc[1], (6.0 + 0.5) / 2.0); // only row 3 precedes it
        assert_eq!(enc[0], (6.0 + 4.0 + 0.5) / 3.0); // rows 3 and 1 precede
        assert_eq!(enc[2], 0.5); // still the only B
    }

    #[test]
    fn own_target_never_leaks_into_own_encoding() {
        // Perturbing y_k leaves row k's encoding bitwise unchanged.
        let values = [1.0, 2.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0];
        let targets = [3.0, -1.0, 4.0, 2.0, 0.5, 7.0, 1.5, -2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ctx = OrderedContext::new_seeded(8, 0.5, 1.0, &mut rng);
        let base = ordered_target_encode(&values, &targets, &ctx);
        for k in 0..8 {
            let mut bumped = targets;
            bumped[k] += 1000.0;
            let enc = ordered_target_encode(&values, &bumped, &ctx);
            assert_eq!(enc[k].to_bits(), base[k].to_bits(), "row {k} leaked");
        }
    }

    #[test]
    fn unseen_category_gets_the_prior() {
        let ctx = OrderedContext::with_unit_schedule(vec![0, 1], 0.25, 2.0);
        let enc = ordered_target_encode(&[1.0, 2.0], &[8.0, 9.0], &ctx);
        assert_eq!(enc[0], 0.25);
        assert_eq!(enc[1], 0.25);
    }

    #[test]
    fn exponential_schedule_doubles_below_n() {
        assert_eq!(OrderedContext::exponential_schedule(1), Vec::<usize>::new());
        assert_eq!(OrderedContext::exponential_schedule(2), vec![1]);
        assert_eq!(OrderedContext::exponential_schedule(9), vec![1, 2, 4, 8]);
        assert_eq!(OrderedContext::exponential_schedule(8), vec![1, 2, 4]);
    }

    #[test]
    fn prefix_for_picks_largest_scheduled_at_most_pos() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ctx = OrderedContext::new_seeded(10, 0.5, 1.0, &mut rng);
        assert_eq!(ctx.schedule, vec![1, 2, 4, 8]);
        assert_eq!(ctx.prefix_for(0), None);
        assert_eq!(ctx.prefix_for(1), Some(1));
        assert_eq!(ctx.prefix_for(3), Some(2));
        assert_eq!(ctx.prefix_for(7), Some(4));
        assert_eq!(ctx.prefix_for(9), Some(8));
    }

    #[test]
    fn inference_encoder_uses_full_statistics() {
        let enc = fit_inference_encoder(3, &[7.0, 7.0, 9.0, 7.0], &[2.0, 4.0, 10.0, 6.0], 0.5, 1.0);
        // A: (2+4+6 + 0.5)/(3+1) = 3.125; B: (10 + 0.5)/2 = 5.25
        assert_eq!(enc.encode(7.0), 3.125);
        assert_eq!(enc.encode(9.0), 5.25);
        assert_eq!(enc.encode(8.0), 0.5); // unseen -> prior
        assert_eq!(enc.slot, 3);
    }

    #[test]
    fn seeded_context_is_reproducible() {
        let a = OrderedContext::new_seeded(32, 0.5, 1.0, &mut ChaCha8Rng::seed_from_u64(77));
        let b = OrderedContext::new_seeded(32, 0.5, 1.0, &mut ChaCha8Rng::seed_from_u64(77));
        assert_eq!(a, b);
        let c = OrderedContext::new_seeded(32, 0.5, 1.0, &mut ChaCha8Rng::seed_from_u64(78));
        assert_ne!(a.perm, c.perm);
    }
}
