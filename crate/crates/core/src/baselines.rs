//! Classical comparison models: kNN, logistic regression and a CART tree.
//!
//! All of them implement [`Scorer`] so they plug into the same evaluation path
//! as the boosted models.

use crate::error::{Error, Result};
use crate::gbdt::{BinMapper, BinnedMatrix, Node, Tree};
use crate::neighbors::k_nearest;
use crate::tabular::Dataset;
use crate::{sigmoid, Scorer};

fn check_width(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

fn require_both_classes(ds: &Dataset) -> Result<()> {
    let c = ds.class_counts();
    if c[0] == 0 || c[1] == 0 {
        return Err(Error::SingleClass);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// k-nearest neighbors

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Fraction of the `k` nearest training rows (Euclidean, ties to the lower
/// index) that carry label 1.
pub fn knn_score(train: &Dataset, query: &[f64], params: &KnnParams) -> Result<f64> {
    if params.k == 0 || params.k > train.n_rows() {
        return Err(Error::KTooLarge {
            k: params.k,
            available: train.n_rows(),
        });
    }
    check_width(train.n_features(), query)?;
    let idx = k_nearest(train.rows(), query, params.k, None);
    let positives = idx.iter().filter(|&&i| train.labels()[i] == 1).count();
    Ok(positives as f64 / params.k as f64)
}

/// Lazy kNN scorer holding its training table.
#[derive(Debug, Clone)]
pub struct KnnModel {
    pub train: Dataset,
    pub params: KnnParams,
}

impl KnnModel {
    pub fn fit(train: &Dataset, params: KnnParams) -> Result<Self> {
        if params.k == 0 || params.k > train.n_rows() {
            return Err(Error::KTooLarge {
                k: params.k,
                available: train.n_rows(),
            });
        }
        Ok(Self {
            train: train.clone(),
            params,
        })
    }
}

impl Scorer for KnnModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        knn_score(&self.train, x, &self.params)
    }
}

// ---------------------------------------------------------------------------
// Logistic regression

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Penalty `l2 / 2 * |w|²` added to the mean log-loss; the bias is not penalised.
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs_run: usize,
    /// Objective before the first epoch followed by one value per epoch.
    pub loss_history: Vec<f64>,
}

impl LogRegModel {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history holds the initial loss")
    }
}

fn logreg_objective(ds: &Dataset, w: &[f64], b: f64, l2: f64) -> f64 {
    let n = ds.n_rows() as f64;
    let mut total = 0.0;
    for (row, &y) in ds.rows().zip(ds.labels()) {
        let z = b + row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>();
        // log(1 + e^z) - y z, written to avoid overflow
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        total += softplus - f64::from(y) * z;
    }
    total / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Full-batch gradient descent from zero on the L2-penalised mean log-loss.
///
/// Gradient steps are stable while `learning_rate < 2 / L` with
/// `L = max_eig(XᵀX) / (4N) + l2`. Larger rates are tolerated: a step that
/// would raise the objective is halved until it does not, so the recorded
/// loss never increases.
pub fn logreg_fit(train: &Dataset, params: &LogRegParams) -> Result<LogRegModel> {
    require_both_classes(train)?;
    if !(params.learning_rate > 0.0) || !(params.l2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "learning_rate {} / l2 {} out of range",
            params.learning_rate, params.l2
        )));
    }
    let d = train.n_features();
    let n = train.n_rows() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = logreg_objective(train, &w, b, params.l2);
    let mut history = vec![loss];
    let mut step = params.learning_rate;
    let mut grad_w = vec![0.0; d];
    let mut epochs_run = 0;

    for _ in 0..params.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &y) in train.rows().zip(train.labels()) {
            let z = b + row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>();
            let r = sigmoid(z) - f64::from(y);
            for (g, x) in grad_w.iter_mut().zip(row) {
                *g += r * x;
            }
            grad_b += r;
        }
        for (g, wj) in grad_w.iter_mut().zip(&w) {
            *g = *g / n + params.l2 * wj;
        }
        grad_b /= n;

        let mut accepted = false;
        for _ in 0..60 {
            let cand_w: Vec<f64> = w.iter().zip(&grad_w).map(|(wj, g)| wj - step * g).collect();
            let cand_b = b - step * grad_b;
            let cand_loss = logreg_objective(train, &cand_w, cand_b, params.l2);
            if cand_loss <= loss {
                w = cand_w;
                b = cand_b;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        epochs_run += 1;
        history.push(loss);
        if !accepted {
            // No descent direction left at machine precision.
            break;
        }
    }
    Ok(LogRegModel {
        weights: w,
        bias: b,
        epochs_run,
        loss_history: history,
    })
}

pub fn logreg_score(model: &LogRegModel, x: &[f64]) -> Result<f64> {
    check_width(model.weights.len(), x)?;
    let z = model.bias + x.iter().zip(&model.weights).map(|(x, w)| x * w).sum::<f64>();
    Ok(sigmoid(z))
}

impl Scorer for LogRegModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        logreg_score(self, x)
    }
}

// ---------------------------------------------------------------------------
// CART

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_leaf: 5,
        }
    }
}

/// Gini tree over exact bins: every distinct training value has its own bin,
/// so bin thresholds are midpoints between distinct training values.
#[derive(Debug, Clone, PartialEq)]
pub struct CartModel {
    /// Leaf values are positive fractions.
    pub tree: Tree,
    pub bins: BinMapper,
}

impl CartModel {
    /// Real-valued threshold of a split: `x <= threshold` goes left.
    pub fn threshold(&self, feature: usize, bin: u32) -> f64 {
        self.bins.edges(feature)[bin as usize]
    }
}

impl Scorer for CartModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        check_width(self.bins.n_features(), x)?;
        Ok(self.tree.predict_binned(&self.bins.bin_row(x)))
    }
}

/// Sum of `n_c² / n` over classes; larger is purer.
#[inline]
fn purity(neg: f64, pos: f64) -> f64 {
    let n = neg + pos;
    if n > 0.0 {
        (neg * neg + pos * pos) / n
    } else {
        0.0
    }
}

/// Gini impurity `1 - Σ p_c²`.
pub fn gini(neg: usize, pos: usize) -> f64 {
    let n = (neg + pos) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (neg as f64 / n, pos as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

pub fn cart_fit(train: &Dataset, params: &CartParams) -> Result<CartModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.max_depth == 0 {
        return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
    }
    let bins = BinMapper::exact(train);
    let binned = bins.bin_dataset(train);
    let builder = CartBuilder {
        binned: &binned,
        labels: train.labels(),
        n_bins: (0..bins.n_features()).map(|j| bins.n_bins(j)).collect(),
        params,
    };
    let mut nodes = Vec::new();
    let rows: Vec<u32> = (0..train.n_rows() as u32).collect();
    builder.build(rows, 0, &mut nodes);
    Ok(CartModel {
        tree: Tree { nodes },
        bins,
    })
}

struct CartBuilder<'a> {
    binned: &'a BinnedMatrix,
    labels: &'a [u8],
    n_bins: Vec<usize>,
    params: &'a CartParams,
}

impl CartBuilder<'_> {
    fn build(&self, rows: Vec<u32>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let pos = rows.iter().filter(|&&r| self.labels[r as usize] == 1).count();
        let neg = rows.len() - pos;
        nodes.push(Node::Leaf {
            value: pos as f64 / rows.len() as f64,
        });
        if depth >= self.params.max_depth || pos == 0 || neg == 0 {
            return id;
        }
        let Some((feature, bin, gain)) = self.best_split(&rows, neg, pos) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&r| self.binned.row(r as usize)[feature] <= bin);
        let left = self.build(left_rows, depth + 1, nodes);
        let right = self.build(right_rows, depth + 1, nodes);
        nodes[id] = Node::Split {
            feature,
            threshold_bin: bin,
            left,
            right,
            gain,
        };
        id
    }

    /// Lowest weighted child Gini; ties go to the lower feature, then lower bin.
    /// Returns `(feature, bin, impurity decrease weighted by node size)`.
    fn best_split(&self, rows: &[u32], neg: usize, pos: usize) -> Option<(usize, u32, f64)> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let n = rows.len();
        if n < 2 * min_leaf {
            return None;
        }
        let parent = purity(neg as f64, pos as f64);
        let mut best: Option<(usize, u32, f64)> = None;
        let mut counts: Vec<[u32; 2]> = Vec::new();
        for (f, &nb) in self.n_bins.iter().enumerate() {
            if nb < 2 {
                continue;
            }
            counts.clear();
            counts.resize(nb, [0, 0]);
            for &r in rows {
                let r = r as usize;
                counts[self.binned.row(r)[f] as usize][self.labels[r] as usize] += 1;
            }
            let (mut ln, mut lp) = (0usize, 0usize);
            for (b, c) in counts[..nb - 1].iter().enumerate() {
                ln += c[0] as usize;
                lp += c[1] as usize;
                let nl = ln + lp;
                if nl < min_leaf {
                    continue;
                }
                if n - nl < min_leaf {
                    break;
                }
                // Skip bins that add nothing: same partition as the previous candidate.
                if c[0] + c[1] == 0 {
                    continue;
                }
                let score = purity(ln as f64, lp as f64) + purity((neg - ln) as f64, (pos - lp) as f64);
                if best.is_none_or(|(_, _, s)| score > s) {
                    best = Some((f, b as u32, score));
                }
            }
        }
        best.map(|(f, b, score)| (f, b, (score - parent).max(0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64], ys: &[u8]) -> Dataset {
        Dataset::new(
            vec!["x".into()],
            xs.iter().map(|&x| vec![x]).collect(),
            ys.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn knn_examples() {
        let ds = one_d(&[0.0, 1.0, 2.0, 10.0], &[0, 1, 0, 1]);
        assert_eq!(knn_score(&ds, &[1.0], &KnnParams { k: 1 }).unwrap(), 1.0);
        assert_eq!(knn_score(&ds, &[2.0], &KnnParams { k: 1 }).unwrap(), 0.0);
        assert_eq!(knn_score(&ds, &[-50.0], &KnnParams { k: 4 }).unwrap(), 0.5);
        assert!(matches!(
            knn_score(&ds, &[0.0], &KnnParams { k: 5 }),
            Err(Error::KTooLarge { .. })
        ));
        assert!(matches!(
            knn_score(&ds, &[0.0, 1.0], &KnnParams { k: 1 }),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn logreg_zero_epochs_scores_half() {
        let ds = one_d(&[-1.0, 1.0], &[0, 1]);
        let m = logreg_fit(
            &ds,
            &LogRegParams {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.weights, vec![0.0]);
        assert_eq!(m.bias, 0.0);
        assert_eq!(logreg_score(&m, &[123.0]).unwrap(), 0.5);
    }

    #[test]
    fn logreg_learns_sign_on_separable_line() {
        let xs: Vec<f64> = (-10..=10)
            .filter(|&i| i != 0)
            .map(|i| f64::from(i) / 4.0)
            .collect();
        let ys: Vec<u8> = xs.iter().map(|&x| u8::from(x > 0.0)).collect();
        let ds = one_d(&xs, &ys);
        let m = logreg_fit(&ds, &LogRegParams::default()).unwrap();
        assert!(m.weights[0] > 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            let s = logreg_score(&m, &[*x]).unwrap();
            assert_eq!(u8::from(s >= 0.5), *y);
        }
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn logreg_huge_penalty_pins_weights() {
        let xs: Vec<f64> = (0..40).map(|i| f64::from(i) - 20.0).collect();
        let ys: Vec<u8> = xs.iter().map(|&x| u8::from(x > 0.0)).collect();
        let m = logreg_fit(
            &one_d(&xs, &ys),
            &LogRegParams {
                l2: 1e6,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.weights[0].abs() < 1e-2, "{:?}", m.weights);
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn logreg_symmetry_and_zero_model() {
        let zero = LogRegModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
            epochs_run: 0,
            loss_history: vec![0.0],
        };
        assert_eq!(logreg_score(&zero, &[3.0, -1.0]).unwrap(), 0.5);
        let m = LogRegModel {
            weights: vec![1.0],
            ..zero.clone()
        };
        assert_eq!(logreg_score(&m, &[0.0]).unwrap(), 0.5);
        let a = logreg_score(&m, &[1.7]).unwrap();
        let b = logreg_score(&m, &[-1.7]).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
        assert!(matches!(
            logreg_score(&m, &[]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn logreg_single_class_is_rejected() {
        let ds = one_d(&[1.0, 2.0], &[0, 0]);
        assert!(matches!(
            logreg_fit(&ds, &LogRegParams::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn cart_pure_data_is_one_leaf() {
        let m = cart_fit(&one_d(&[1.0, 2.0, 3.0], &[1, 1, 1]), &CartParams::default()).unwrap();
        assert_eq!(m.tree.nodes, vec![Node::Leaf { value: 1.0 }]);
        let m = cart_fit(&one_d(&[1.0, 2.0, 3.0], &[0, 0, 0]), &CartParams::default()).unwrap();
        assert_eq!(m.tree.nodes, vec![Node::Leaf { value: 0.0 }]);
    }

    #[test]
    fn cart_separable_line_is_depth_one() {
        let xs = [0.0, 1.0, 2.0, 3.0, 7.0, 8.0, 9.0, 10.0];
        let ys = [0, 0, 0, 0, 1, 1, 1, 1];
        let params = CartParams {
            max_depth: 5,
            min_samples_leaf: 1,
        };
        let m = cart_fit(&one_d(&xs, &ys), &params).unwrap();
        assert_eq!(m.tree.depth(), 1);
        let Node::Split {
            feature,
            threshold_bin,
            ..
        } = m.tree.nodes[0]
        else {
            panic!("root is a leaf");
        };
        assert_eq!(m.threshold(feature, threshold_bin), 5.0);
        assert_eq!(m.score(&[4.9]).unwrap(), 0.0);
        assert_eq!(m.score(&[5.1]).unwrap(), 1.0);
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(5, 5), 0.5);
        assert_eq!(gini(4, 0), 0.0);
        assert_eq!(gini(0, 0), 0.0);
    }
}
