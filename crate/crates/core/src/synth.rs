//! Seeded generator of imbalanced transaction-like tables.
//!
//! Legitimate rows are standard normal in every feature. Fraud rows come from
//! a few compact clusters placed at vertices of a hypercube in the
//! informative subspace, in mirrored pairs (`c` and `-c`), so the positive
//! class has no linear direction that separates it while remaining easy for
//! axis-aligned trees. The remaining features are pure noise.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng_from_seed;
use crate::tabular::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub positive_fraction: f64,
    pub n_features: usize,
    pub n_informative: usize,
    /// Number of mirrored cluster pairs for the positive class.
    pub cluster_pairs: usize,
    /// Half side length of the hypercube holding the cluster centres.
    pub class_sep: f64,
    /// Standard deviation of each positive cluster.
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_rows: 10_000,
            positive_fraction: 0.01,
            n_features: 20,
            n_informative: 10,
            cluster_pairs: 2,
            class_sep: 1.5,
            cluster_spread: 0.6,
            seed: 0,
        }
    }
}

/// Generates the table. Feature names are `V1..VD`; the informative
/// features sit at seeded random positions.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_informative == 0 || spec.n_informative > spec.n_features {
        return Err(Error::InvalidParameter(format!(
            "n_informative {} must lie in [1, {}]",
            spec.n_informative, spec.n_features
        )));
    }
    if !(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0) || spec.cluster_pairs == 0 {
        return Err(Error::InvalidParameter(
            "positive_fraction must lie in (0, 1) and cluster_pairs be >= 1".into(),
        ));
    }
    let n_pos = (spec.positive_fraction * spec.n_rows as f64).round() as usize;
    if n_pos < 2 || n_pos + 2 > spec.n_rows {
        return Err(Error::InvalidParameter(format!(
            "{} rows at fraction {} leave too few rows per class",
            spec.n_rows, spec.positive_fraction
        )));
    }

    let mut rng = rng_from_seed(spec.seed);
    let mut columns: Vec<usize> = (0..spec.n_features).collect();
    columns.shuffle(&mut rng);
    let informative = &columns[..spec.n_informative];

    let centres: Vec<Vec<f64>> = (0..spec.cluster_pairs)
        .flat_map(|_| {
            let c: Vec<f64> = (0..spec.n_informative)
                .map(|_| {
                    if rng.random::<bool>() {
                        spec.class_sep
                    } else {
                        -spec.class_sep
                    }
                })
                .collect();
            let mirror = c.iter().map(|v| -v).collect();
            [c, mirror]
        })
        .collect();

    let mut labels: Vec<u8> = (0..spec.n_rows).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);

    let mut values = Vec::with_capacity(spec.n_rows * spec.n_features);
    let mut row = vec![0.0; spec.n_features];
    for &label in &labels {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        if label == 1 {
            let centre = &centres[rng.random_range(0..centres.len())];
            for (k, &j) in informative.iter().enumerate() {
                row[j] = centre[k] + spec.cluster_spread * row[j];
            }
        }
        values.extend_from_slice(&row);
    }
    let names = (1..=spec.n_features).map(|j| format!("V{j}")).collect();
    Dataset::from_flat(names, values, labels)
}
