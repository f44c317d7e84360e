use crate::cleanse::quantile_sorted;
use crate::tabular::Dataset;

/// Per-feature ascending bin edges.
///
/// A value `x` falls into bin `#{edges < x}`, so a value equal to an edge sits
/// in the lower bin and anything above the last edge lands in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    edges: Vec<Vec<f64>>,
}

/// Row-major bin indices for a whole table.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    bins: Vec<u32>,
    n_features: usize,
}

impl BinnedMatrix {
    pub fn n_rows(&self) -> usize {
        self.bins.len().checked_div(self.n_features).unwrap_or(0)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.bins[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// Midpoint of `a < b`, falling back to `a` when the two are adjacent floats.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + 0.5 * (b - a);
    if m < b {
        m
    } else {
        a
    }
}

fn distinct_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

impl BinMapper {
    /// Quantile edges with at most `max_bins` bins per feature.
    ///
    /// Features with no more than `max_bins` distinct values get one bin per
    /// value (midpoint edges); otherwise edges sit at the `j / max_bins`
    /// quantiles of the distinct values.
    pub fn fit(train: &Dataset, max_bins: usize) -> Self {
        let max_bins = max_bins.max(2);
        let edges = (0..train.n_features())
            .map(|j| {
                let distinct = distinct_sorted(train.column(j));
                if distinct.len() <= max_bins {
                    distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
                } else {
                    let mut e: Vec<f64> = (1..max_bins)
                        .map(|k| quantile_sorted(&distinct, k as f64 / max_bins as f64))
                        .collect();
                    e.dedup();
                    e
                }
            })
            .collect();
        Self { edges }
    }

    /// One bin per distinct training value, edges at the midpoints.
    pub fn exact(train: &Dataset) -> Self {
        let edges = (0..train.n_features())
            .map(|j| {
                distinct_sorted(train.column(j))
                    .windows(2)
                    .map(|w| midpoint(w[0], w[1]))
                    .collect()
            })
            .collect();
        Self { edges }
    }

    /// Caller guarantees each list is strictly increasing.
    pub(crate) fn from_edges(edges: Vec<Vec<f64>>) -> Self {
        Self { edges }
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    #[inline]
    pub fn bin(&self, feature: usize, x: f64) -> u32 {
        self.edges[feature].partition_point(|&e| e < x) as u32
    }

    pub fn bin_row(&self, row: &[f64]) -> Vec<u32> {
        row.iter().enumerate().map(|(j, &x)| self.bin(j, x)).collect()
    }

    pub fn bin_dataset(&self, ds: &Dataset) -> BinnedMatrix {
        let mut bins = Vec::with_capacity(ds.values().len());
        for row in ds.rows() {
            bins.extend(row.iter().enumerate().map(|(j, &x)| self.bin(j, x)));
        }
        BinnedMatrix {
            bins,
            n_features: ds.n_features(),
        }
    }
}
