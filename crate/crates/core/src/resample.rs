//! SMOTE oversampling of the minority class.
//!
//! Synthetic rows are placed on the segment between a randomly drawn minority
//! row and one of its `k` nearest minority neighbors:
//! `x_new = x_i + lambda * (x_neighbor - x_i)`, `lambda ~ U[0, 1)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::neighbors::k_nearest;
use crate::rng_from_seed;
use crate::tabular::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoteParams {
    pub k: usize,
    /// Minority:majority ratio to reach, in `(0, 1]`.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self {
            k: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

/// Random choices behind one synthetic row. Indices count minority rows in
/// their original order, not dataset rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisDraw {
    pub base_index: usize,
    pub neighbor_index: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutcome {
    /// Originals in their original order, followed by the synthetic rows.
    pub dataset: Dataset,
    pub minority_label: u8,
    /// Dataset row of each minority row, so `draws` can be mapped back.
    pub minority_rows: Vec<usize>,
    pub draws: Vec<SynthesisDraw>,
}

impl SmoteOutcome {
    /// Audit log, one `base_index,neighbor_index,lambda` line per synthetic row.
    pub fn audit_log(&self) -> String {
        let mut out = String::new();
        for d in &self.draws {
            out.push_str(&format!("{},{},{}\n", d.base_index, d.neighbor_index, d.lambda));
        }
        out
    }
}

/// The `k` nearest rows to `rows[i]` among `rows`, excluding `i` itself.
pub fn minority_neighbors(rows: &[&[f64]], i: usize, k: usize) -> Result<Vec<usize>> {
    if k >= rows.len() {
        return Err(Error::KTooLarge {
            k,
            available: rows.len().saturating_sub(1),
        });
    }
    Ok(k_nearest(rows.iter().copied(), rows[i], k, Some(i)))
}

pub fn synthesize_sample(base: &[f64], neighbor: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if base.len() != neighbor.len() {
        return Err(Error::DimensionMismatch {
            expected: base.len(),
            actual: neighbor.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} not in [0, 1]")));
    }
    Ok(base
        .iter()
        .zip(neighbor)
        .map(|(&x, &n)| x + lambda * (n - x))
        .collect())
}

/// Appends synthetic minority rows until the minority count reaches
/// `ceil(target_ratio * majority_count)`.
///
/// Per sample the generator is consumed as: base row, neighbor slot, lambda.
pub fn smote_balance(train: &Dataset, params: &SmoteParams) -> Result<SmoteOutcome> {
    if !(params.target_ratio > 0.0 && params.target_ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target_ratio {} not in (0, 1]",
            params.target_ratio
        )));
    }
    if params.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let minority_label = if counts[1] < counts[0] { 1 } else { 0 };
    let minority_count = counts[minority_label as usize];
    let majority_count = counts[1 - minority_label as usize];
    let minority_rows: Vec<usize> = (0..train.n_rows())
        .filter(|&i| train.labels()[i] == minority_label)
        .collect();

    let target = (params.target_ratio * majority_count as f64).ceil() as usize;
    let n_synthetic = target.saturating_sub(minority_count);
    let mut dataset = train.clone();
    let mut draws = Vec::with_capacity(n_synthetic);
    if n_synthetic == 0 {
        return Ok(SmoteOutcome {
            dataset,
            minority_label,
            minority_rows,
            draws,
        });
    }

    let points: Vec<&[f64]> = minority_rows.iter().map(|&i| train.row(i)).collect();
    let neighbors = (0..points.len())
        .map(|i| minority_neighbors(&points, i, params.k))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = rng_from_seed(params.seed);
    for _ in 0..n_synthetic {
        let base_index = rng.random_range(0..points.len());
        let neighbor_index = neighbors[base_index][rng.random_range(0..params.k)];
        let lambda: f64 = rng.random();
        let sample = synthesize_sample(points[base_index], points[neighbor_index], lambda)?;
        dataset.push_row(&sample, minority_label);
        draws.push(SynthesisDraw {
            base_index,
            neighbor_index,
            lambda,
        });
    }
    Ok(SmoteOutcome {
        dataset,
        minority_label,
        minority_rows,
        draws,
    })
}
