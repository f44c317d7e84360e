//! Numeric feature tables with a binary label.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng_from_seed;

/// Default name of the label column in ingested CSV files.
pub const DEFAULT_LABEL_COLUMN: &str = "Class";

/// Row-major table of finite features with a 0/1 label per row.
///
/// Label `1` marks the positive (fraud) class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    /// Builds a dataset from per-row vectors, checking shape, finiteness and labels.
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let width = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for row in &rows {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(feature_names, values, labels)
    }

    /// Builds a dataset from a row-major value buffer.
    pub fn from_flat(feature_names: Vec<String>, values: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let width = feature_names.len();
        if width == 0 {
            if !values.is_empty() {
                return Err(Error::DimensionMismatch {
                    expected: 0,
                    actual: values.len(),
                });
            }
        } else if values.len() != labels.len() * width {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * width,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite feature value {v}")));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidParameter(format!("label {l} is not 0 or 1")));
        }
        Ok(Self {
            feature_names,
            values,
            labels,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        let d = self.n_features();
        (0..self.n_rows()).map(move |i| &self.values[i * d..(i + 1) * d])
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Row counts for labels 0 and 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - pos, pos]
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            labels,
        }
    }

    /// Same rows with the columns permuted: output column `j` is input column `order[j]`.
    pub fn select_features(&self, order: &[usize]) -> Dataset {
        let names = order.iter().map(|&j| self.feature_names[j].clone()).collect();
        let mut values = Vec::with_capacity(self.n_rows() * order.len());
        for r in self.rows() {
            values.extend(order.iter().map(|&j| r[j]));
        }
        Dataset {
            feature_names: names,
            values,
            labels: self.labels.clone(),
        }
    }

    /// Appends a row; panics if its width differs or a value is non-finite.
    pub fn push_row(&mut self, row: &[f64], label: u8) {
        assert_eq!(row.len(), self.n_features(), "row width");
        assert!(row.iter().all(|v| v.is_finite()), "non-finite value");
        assert!(label <= 1, "label must be 0 or 1");
        self.values.extend_from_slice(row);
        self.labels.push(label);
    }

    /// Applies `f(column, value)` to every cell.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Dataset {
        let d = self.n_features();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(k % d, v))
            .collect();
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            labels: self.labels.clone(),
        }
    }
}

/// Reads a CSV file whose header contains `label_column`.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column)
}

/// Parses CSV text: one header line, numeric cells, a 0/1 label column.
pub fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    // Header is line 1.
    let mut line = 1;
    while rdr.read_record(&mut record)? {
        line += 1;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        for (j, name) in header.iter().enumerate() {
            let cell = record.get(j).unwrap_or("").trim();
            let parsed = cell.parse::<f64>().ok().filter(|v| v.is_finite());
            let Some(v) = parsed else {
                return Err(Error::Parse {
                    line,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            };
            if j == label_idx {
                if v == 0.0 {
                    labels.push(0);
                } else if v == 1.0 {
                    labels.push(1);
                } else {
                    return Err(Error::NonBinaryLabel {
                        line,
                        value: cell.to_string(),
                    });
                }
            } else {
                values.push(v);
            }
        }
        if record.len() > header.len() {
            return Err(Error::Parse {
                line,
                column: format!("#{}", header.len() + 1),
                value: record[header.len()].to_string(),
            });
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::from_flat(feature_names, values, labels)
}

/// Writes the dataset as CSV with the label as the last column.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W, label_column: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push(label_column);
    wtr.write_record(&header)?;
    let mut cells = Vec::with_capacity(header.len());
    for (row, label) in ds.rows().zip(ds.labels()) {
        cells.clear();
        cells.extend(row.iter().map(|v| v.to_string()));
        cells.push(label.to_string());
        wtr.write_record(&cells)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file), label_column)
}

/// Disjoint train/test partition of one dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    /// Row indices into the source dataset, ascending.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Per class, sends `floor(test_fraction * count)` seeded-shuffled rows to test.
///
/// Both partitions keep the source row order.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut in_test = vec![false; ds.n_rows()];
    for class in 0..=1u8 {
        let mut members: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::DegenerateClass {
                class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n_test = (test_fraction * members.len() as f64).floor() as usize;
        for &i in &members[..n_test] {
            in_test[i] = true;
        }
    }
    let (test_indices, train_indices): (Vec<usize>, Vec<usize>) = (0..ds.n_rows()).partition(|&i| in_test[i]);
    Ok(SplitPair {
        train: ds.select(&train_indices),
        test: ds.select(&test_indices),
        train_indices,
        test_indices,
    })
}

/// Ascending row indices of a seeded subsample of at most `max_rows` rows.
///
/// Positive rows are kept first (up to half the budget) so a rare class stays
/// visible in plots; negatives fill the remainder.
pub fn subsample_keep_positives(ds: &Dataset, max_rows: usize, seed: u64) -> Vec<usize> {
    if ds.n_rows() <= max_rows {
        return (0..ds.n_rows()).collect();
    }
    let mut rng = rng_from_seed(seed);
    let mut pos: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] == 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    pos.truncate((max_rows / 2).max(max_rows.saturating_sub(neg.len())));
    neg.truncate(max_rows - pos.len());
    let mut out: Vec<usize> = pos.into_iter().chain(neg).collect();
    out.sort_unstable();
    out
}

/// Per-feature range fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScaleParams {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = ds.n_features();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in ds.rows() {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Ok(Self { min, max })
    }

    /// `(x - min) / (max - min)`, or 0 for a constant feature.
    pub fn scale_value(&self, j: usize, x: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            (x - self.min[j]) / span
        } else {
            0.0
        }
    }

    pub fn unscale_value(&self, j: usize, z: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            self.min[j] + z * span
        } else {
            self.min[j]
        }
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        ds.map_values(|j, x| self.scale_value(j, x))
    }

    pub fn inverse_transform(&self, ds: &Dataset) -> Dataset {
        ds.map_values(|j, z| self.unscale_value(j, z))
    }
}

/// Fits min-max parameters on the train side and applies them to both sides.
pub fn minmax_scale(split: &SplitPair) -> Result<(SplitPair, ScaleParams)> {
    let params = ScaleParams::fit(&split.train)?;
    let scaled = SplitPair {
        train: params.transform(&split.train),
        test: params.transform(&split.test),
        train_indices: split.train_indices.clone(),
        test_indices: split.test_indices.clone(),
    };
    Ok((scaled, params))
}

/// Pearson correlation matrix over all features plus the label as the last column.
///
/// Pairs involving a constant column get 0 off the diagonal; the diagonal is always 1.
pub fn correlation_matrix(ds: &Dataset) -> Vec<Vec<f64>> {
    let d = ds.n_features();
    let n = ds.n_rows() as f64;
    let mut columns: Vec<Vec<f64>> = (0..d).map(|j| ds.column(j)).collect();
    columns.push(ds.labels().iter().map(|&l| f64::from(l)).collect());
    let centered: Vec<(Vec<f64>, f64)> = columns
        .into_iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            let dev: Vec<f64> = c.iter().map(|v| v - mean).collect();
            let norm = dev.iter().map(|v| v * v).sum::<f64>().sqrt();
            (dev, norm)
        })
        .collect();
    let m = centered.len();
    let mut out = vec![vec![0.0; m]; m];
    for a in 0..m {
        out[a][a] = 1.0;
        for b in a + 1..m {
            let (da, na) = &centered[a];
            let (db, nb) = &centered[b];
            let r = if *na > 0.0 && *nb > 0.0 {
                let dot: f64 = da.iter().zip(db).map(|(x, y)| x * y).sum();
                (dot / (na * nb)).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    out
}
