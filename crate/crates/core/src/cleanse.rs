//! Class-conditional Tukey-fence outlier pruning.
//!
//! Fences are fitted on one class (normally the fraud class) and only rows of
//! that class are ever removed.

use crate::error::{Error, Result};
use crate::tabular::Dataset;

pub const DEFAULT_MULTIPLIER: f64 = 1.5;

/// Linear-interpolation quantile of `values` at `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

/// Same as [`quantile`] on an already ascending, non-empty slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fences {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower: f64,
    pub upper: f64,
    pub multiplier: f64,
}

impl Fences {
    /// True when `x` lies strictly below `lower` or strictly above `upper`.
    pub fn is_outside(&self, x: f64) -> bool {
        x < self.lower || x > self.upper
    }
}

pub fn tukey_fences(values: &[f64], multiplier: f64) -> Result<Fences> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(multiplier >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fence multiplier {multiplier} < 0"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(Fences {
        q1,
        q3,
        iqr,
        lower: q1 - multiplier * iqr,
        upper: q3 + multiplier * iqr,
        multiplier,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRemoval {
    pub feature: String,
    pub fences: Fences,
    pub removed_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovalReport {
    pub features: Vec<FeatureRemoval>,
    /// Indices into the input dataset, ascending.
    pub removed_row_indices: Vec<usize>,
    pub rows_before: usize,
    pub rows_after: usize,
}

impl RemovalReport {
    /// CSV section `feature,q1,q3,lower,upper,removed_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,q1,q3,lower,upper,removed_count\n");
        for f in &self.features {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f.feature, f.fences.q1, f.fences.q3, f.fences.lower, f.fences.upper, f.removed_count
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOptions {
    pub target_class: u8,
    pub multiplier: f64,
    /// Refit fences on the surviving rows before each feature. When false, all
    /// fences come from the untouched target-class subset.
    pub recompute_fences: bool,
}

impl Default for PruneOptions {
    fn default() -> Self {
        Self {
            target_class: 1,
            multiplier: DEFAULT_MULTIPLIER,
            recompute_fences: true,
        }
    }
}

/// Removes `target_class` rows that fall strictly outside the Tukey fences of
/// each named feature, processing features in order.
pub fn prune_class_outliers(
    ds: &Dataset,
    features: &[impl AsRef<str>],
    opts: &PruneOptions,
) -> Result<(Dataset, RemovalReport)> {
    let columns = features
        .iter()
        .map(|f| {
            let name = f.as_ref();
            ds.feature_index(name)
                .map(|j| (name.to_string(), j))
                .ok_or_else(|| Error::UnknownFeature(name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut alive = vec![true; ds.n_rows()];
    let target_values = |alive: &[bool], j: usize| -> Vec<f64> {
        (0..ds.n_rows())
            .filter(|&i| alive[i] && ds.labels()[i] == opts.target_class)
            .map(|i| ds.row(i)[j])
            .collect()
    };
    let fences_for = |values: Vec<f64>| -> Result<Fences> {
        if values.is_empty() {
            return Err(Error::EmptyClassSubset(opts.target_class));
        }
        tukey_fences(&values, opts.multiplier)
    };

    let fixed: Option<Vec<Fences>> = if opts.recompute_fences {
        None
    } else {
        Some(
            columns
                .iter()
                .map(|&(_, j)| fences_for(target_values(&alive, j)))
                .collect::<Result<_>>()?,
        )
    };

    let mut removals = Vec::with_capacity(columns.len());
    for (step, (name, j)) in columns.into_iter().enumerate() {
        let fences = match &fixed {
            Some(all) => all[step],
            None => fences_for(target_values(&alive, j))?,
        };
        let mut removed_count = 0;
        for (i, live) in alive.iter_mut().enumerate() {
            if *live && ds.labels()[i] == opts.target_class && fences.is_outside(ds.row(i)[j]) {
                *live = false;
                removed_count += 1;
            }
        }
        removals.push(FeatureRemoval {
            feature: name,
            fences,
            removed_count,
        });
    }

    let (kept, removed): (Vec<usize>, Vec<usize>) = (0..ds.n_rows()).partition(|&i| alive[i]);
    let report = RemovalReport {
        features: removals,
        removed_row_indices: removed,
        rows_before: ds.n_rows(),
        rows_after: kept.len(),
    };
    Ok((ds.select(&kept), report))
}
