//! Exclusive feature bundling: mutually exclusive sparse columns (never
//! nonzero on the same row) are packed into one column by offsetting each
//! member's value range, shrinking the number of histograms to build.
//!
//! Only non-negative columns may share a bundle; zero stays the shared
//! "absent" code. A member occupying offset o with max value m owns the
//! bundled range (o, o+m]; the next member starts at o+m, so member ranges
//! tile the positive axis with no gaps. Columns that cannot bundle (negative
//! values, or conflicts with every open bundle) become pass-through
//! singletons.

use super::ColMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BundleMember {
    pub feature: usize,
    pub offset: f64,
    /// Largest value the member column took on the data the map was built
    /// from; the member's bundled range is (offset, offset + max].
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub members: Vec<BundleMember>,
}

impl Bundle {
    fn singleton(feature: usize) -> Self {
        Bundle {
            members: vec![BundleMember {
                feature,
                offset: 0.0,
                max: f64::INFINITY,
            }],
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleMap {
    pub bundles: Vec<Bundle>,
    pub n_source_features: usize,
}

impl BundleMap {
    /// One pass-through bundle per feature; transform is the identity.
    pub fn identity(n_features: usize) -> Self {
        BundleMap {
            bundles: (0..n_features).map(Bundle::singleton).collect(),
            n_source_features: n_features,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.bundles.len() == self.n_source_features
            && self.bundles.iter().all(|b| b.is_singleton())
    }

    pub fn n_bundled(&self) -> usize {
        self.bundles.len()
    }

    /// Bundled value of one source row. Singletons pass the raw value
    /// through; multi-member bundles emit offset + value for the nonzero
    /// member (rows exclusive by construction; if a foreign row violates
    /// exclusivity the highest-offset nonzero member wins).
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.n_source_features);
        self.bundles
            .iter()
            .map(|bundle| {
                if bundle.is_singleton() {
                    row[bundle.members[0].feature]
                } else {
                    let mut out = 0.0;
                    for m in &bundle.members {
                        let v = row[m.feature];
                        if v != 0.0 {
                            out = m.offset + v;
                        }
                    }
                    out
                }
            })
            .collect()
    }

    /// Bundled copy of a whole matrix.
    pub fn transform_matrix(&self, m: &ColMatrix) -> ColMatrix {
        assert_eq!(m.n_cols(), self.n_source_features);
        let cols = self
            .bundles
            .iter()
            .map(|bundle| {
                if bundle.is_singleton() {
                    m.col(bundle.members[0].feature).to_vec()
                } else {
                    let mut col = vec![0.0; m.n_rows()];
                    for member in &bundle.members {
                        let src = m.col(member.feature);
                        for (r, v) in col.iter_mut().enumerate() {
                            if src[r] != 0.0 {
                                *v = member.offset + src[r];
                            }
                        }
                    }
                    col
                }
            })
            .collect();
        ColMatrix::new(cols)
    }

    /// Map a threshold on a bundled column back to (source feature, raw
    /// threshold). Exact arithmetic inversion: a bundled comparison
    /// `bundled <= t` with t inside member (o, o+max] is `raw <= t - o` on
    /// that member. None when t falls outside every member's range.
    pub fn unbundle_threshold(&self, bundled_col: usize, t: f64) -> Option<(usize, f64)> {
        let bundle = &self.bundles[bundled_col];
        if bundle.is_singleton() {
            return Some((bundle.members[0].feature, t));
        }
        for m in &bundle.members {
            if t > m.offset && t <= m.offset + m.max {
                return Some((m.feature, t - m.offset));
            }
        }
        None
    }
}

/// Greedy zero-conflict bundling in natural column order: each non-negative
/// column joins the first open bundle whose rows never overlap its own
/// nonzero rows; otherwise it opens a new bundle. Columns with negative
/// values never share a bundle.
pub fn bundle_exclusive_features(m: &ColMatrix) -> BundleMap {
    struct Open {
        members: Vec<usize>,
        support: Vec<u64>,
    }
    let n_rows = m.n_rows();
    let words = n_rows.div_ceil(64);
    let mut opens: Vec<Open> = Vec::new();
    let mut singles: Vec<usize> = Vec::new();

    for f in 0..m.n_cols() {
        let col = m.col(f);
        if col.iter().any(|&v| v < 0.0) {
            singles.push(f);
            continue;
        }
        let mut support = vec![0u64; words];
        for (r, &v) in col.iter().enumerate() {
            if v != 0.0 {
                support[r / 64] |= 1 << (r % 64);
            }
        }
        let slot = opens.iter().position(|o| {
            o.support
                .iter()
                .zip(&support)
                .all(|(a, b)| a & b == 0)
        });
        match slot {
            Some(i) => {
                for (a, b) in opens[i].support.iter_mut().zip(&support) {
                    *a |= b;
                }
                opens[i].members.push(f);
            }
            None => opens.push(Open {
                members: vec![f],
                support,
            }),
        }
    }

    // Emit bundles in order of their first member so the bundled feature
    // order is stable, then the leftover singletons.
    let mut keyed: Vec<(usize, Bundle)> = Vec::new();
    for open in opens {
        if open.members.len() == 1 {
            keyed.push((open.members[0], Bundle::singleton(open.members[0])));
            continue;
        }
        let mut offset = 0.0;
        let members = open
            .members
            .iter()
            .map(|&f| {
                let max = m.col(f).iter().cloned().fold(0.0f64, f64::max);
                let member = BundleMember {
                    feature: f,
                    offset,
                    max,
                };
                offset += max;
                member
            })
            .collect();
        keyed.push((open.members[0], Bundle { members }));
    }
    for f in singles {
        keyed.push((f, Bundle::singleton(f)));
    }
    keyed.sort_by_key(|(first, _)| *first);
    BundleMap {
        bundles: keyed.into_iter().map(|(_, b)| b).collect(),
        n_source_features: m.n_cols(),
    }
}
