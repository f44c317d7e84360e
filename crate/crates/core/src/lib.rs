//! Building blocks for imbalanced binary classification on numeric tables.
//!
//! The crate is organised as a pipeline of small, independent modules:
//!
//! - [`tabular`]: the [`Dataset`] type, CSV ingestion, stratified splitting and min-max scaling.
//! - [`cleanse`]: class-conditional Tukey-fence outlier pruning.
//! - [`resample`]: SMOTE oversampling of the minority class.
//! - [`gbdt`]: histogram gradient-boosted trees with leaf-wise or level-wise growth.
//! - [`baselines`]: k-nearest neighbors, logistic regression and a CART tree.
//! - [`metrics`]: confusion counts, precision/recall/F1 and ROC analysis.
//! - [`embed`]: exact t-SNE for 2-D visualisation.
//! - [`synth`]: a seeded generator of imbalanced synthetic transaction tables.
//!
//! Every randomised operation takes an explicit seed and is bit-reproducible.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cleanse;
pub mod embed;
pub mod error;
pub mod gbdt;
pub mod metrics;
mod neighbors;
pub mod resample;
pub mod synth;
pub mod tabular;

pub use error::{Error, Result};
pub use tabular::Dataset;

pub(crate) fn rng_from_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Logistic function.
#[inline]
pub fn sigmoid(margin: f64) -> f64 {
    1.0 / (1.0 + (-margin).exp())
}

/// A fitted binary classifier that maps a feature vector to `P(label = 1)`.
pub trait Scorer: Sync {
    fn score(&self, x: &[f64]) -> Result<f64>;

    /// Scores every row, in row order.
    fn score_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        let rows: Vec<&[f64]> = ds.rows().collect();
        rows.par_iter().map(|r| self.score(r)).collect()
    }
}
