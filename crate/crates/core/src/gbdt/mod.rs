//! Histogram gradient-boosted decision trees for binary classification.
//!
//! Trees are fitted with second-order (Newton) statistics of the logistic loss
//! over quantile-binned features. A split with child sums `(G_L, H_L)` and
//! `(G_R, H_R)` scores
//!
//! ```text
//! gain = ½ [ S(G_L)² / (H_L + λ) + S(G_R)² / (H_R + λ) − S(G_L + G_R)² / (H_L + H_R + λ) ] − γ
//! ```
//!
//! where `S(G) = sign(G) · max(|G| − α, 0)` applies the L1 penalty `α`, and a
//! leaf holding `(G, H)` outputs `−S(G) / (H + λ)` scaled by the learning rate.
//!
//! Two growth policies are offered: [`Growth::LeafWise`] always expands the
//! frontier leaf with the largest gain until `max_leaves` is reached, and
//! [`Growth::LevelWise`] splits every improvable node of a level before moving
//! down, stopping at `max_depth`.

mod bins;
mod format;
mod tree;

pub use bins::{BinMapper, BinnedMatrix};
pub use format::{load_model, save_model, FORMAT_HEADER};
pub use tree::{DefaultDirection, Node, Tree};

use crate::error::{Error, Result};
use crate::tabular::Dataset;
use crate::{sigmoid, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Growth {
    #[default]
    LeafWise,
    LevelWise,
}

impl std::str::FromStr for Growth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaf_wise" | "leafwise" => Ok(Growth::LeafWise),
            "level_wise" | "levelwise" | "depth_wise" => Ok(Growth::LevelWise),
            other => Err(Error::InvalidParameter(format!("unknown growth `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    /// Leaf cap for leaf-wise growth.
    pub max_leaves: usize,
    /// Depth cap for level-wise growth.
    pub max_depth: usize,
    pub growth: Growth,
    /// L1 penalty on leaf outputs (α).
    pub l1: f64,
    /// L2 penalty on leaf outputs (λ).
    pub l2: f64,
    /// Minimum gain for a split to be kept (γ).
    pub min_split_gain: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            learning_rate: 0.1,
            max_leaves: 31,
            max_depth: 6,
            growth: Growth::LeafWise,
            l1: 0.0,
            l2: 1.0,
            min_split_gain: 0.0,
            min_child_weight: 1e-3,
            max_bins: 256,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if !(2..=256).contains(&self.max_bins) {
            return bad(format!("max_bins {} not in [2, 256]", self.max_bins));
        }
        if self.max_leaves < 2 && self.growth == Growth::LeafWise {
            return bad("max_leaves must be at least 2".into());
        }
        for (name, v) in [
            ("l1", self.l1),
            ("l2", self.l2),
            ("min_split_gain", self.min_split_gain),
            ("min_child_weight", self.min_child_weight),
        ] {
            if !(v >= 0.0) {
                return bad(format!("{name} = {v} must be >= 0"));
            }
        }
        Ok(())
    }
}

/// L1 soft-threshold: `sign(g) * max(|g| - alpha, 0)`.
#[inline]
pub fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// Unscaled Newton leaf output `-S(G) / (H + λ)`.
#[inline]
pub fn leaf_weight(grad: f64, hess: f64, l1: f64, l2: f64) -> f64 {
    let denom = hess + l2;
    if denom > 0.0 {
        -soft_threshold(grad, l1) / denom
    } else {
        0.0
    }
}

#[inline]
fn node_score(grad: f64, hess: f64, l1: f64, l2: f64) -> f64 {
    let denom = hess + l2;
    if denom > 0.0 {
        let s = soft_threshold(grad, l1);
        s * s / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    /// Log-odds added before any tree.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub bin_mapper: BinMapper,
    pub feature_names: Vec<String>,
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Raw additive score (log-odds).
    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_width(x)?;
        let bins = self.bin_mapper.bin_row(x);
        Ok(self
            .trees
            .iter()
            .fold(self.base_score, |m, t| m + t.predict_binned(&bins)))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.predict_margin(x)?))
    }

    /// Leaf node index reached in each tree.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_width(x)?;
        let bins = self.bin_mapper.bin_row(x);
        Ok(self.trees.iter().map(|t| t.leaf_index(&bins)).collect())
    }

    /// Total split gain credited to each feature.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features()];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, gain, .. } = *node {
                    out[feature] += gain;
                }
            }
        }
        out
    }
}

impl Scorer for GbdtModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        self.predict_proba(x)
    }
}

/// Log-odds of the clipped positive rate.
pub fn initial_score(labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let p = (pos / labels.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

pub fn train_gbdt(train: &Dataset, params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let bin_mapper = BinMapper::fit(train, params.max_bins);
    let binned = bin_mapper.bin_dataset(train);
    let base_score = initial_score(train.labels());
    let targets: Vec<f64> = train.labels().iter().map(|&l| f64::from(l)).collect();

    let mut margins = vec![base_score; train.n_rows()];
    let mut grad = vec![0.0; train.n_rows()];
    let mut hess = vec![0.0; train.n_rows()];
    let mut trees = Vec::with_capacity(params.n_trees);
    let grower = Grower::new(&binned, &bin_mapper, params);
    for _ in 0..params.n_trees {
        for i in 0..margins.len() {
            let p = sigmoid(margins[i]);
            grad[i] = p - targets[i];
            hess[i] = p * (1.0 - p);
        }
        let tree = grower.grow(&grad, &hess);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += tree.predict_binned(binned.row(i));
        }
        trees.push(tree);
    }
    Ok(GbdtModel {
        base_score,
        trees,
        bin_mapper,
        feature_names: train.feature_names().to_vec(),
    })
}

/// Strictly better by more than accumulated round-off. Candidates that induce
/// the same partition through different histogram sums must tie, so the
/// earlier (lower feature, lower bin) one is kept.
#[inline]
fn beats(gain: f64, best: f64) -> bool {
    gain - best > 1e-12 * best.abs()
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    bin: u32,
    gain: f64,
}

/// A leaf that may still be split.
struct Pending {
    node: usize,
    rows: Vec<u32>,
    grad: f64,
    hess: f64,
    depth: usize,
    best: Option<SplitChoice>,
}

struct Grower<'a> {
    binned: &'a BinnedMatrix,
    params: &'a GbdtParams,
    /// Start of each feature's slice in a flat histogram.
    offsets: Vec<usize>,
    n_bins: Vec<usize>,
}

impl<'a> Grower<'a> {
    fn new(binned: &'a BinnedMatrix, mapper: &BinMapper, params: &'a GbdtParams) -> Self {
        let n_bins: Vec<usize> = (0..mapper.n_features()).map(|j| mapper.n_bins(j)).collect();
        let mut offsets = Vec::with_capacity(n_bins.len() + 1);
        let mut acc = 0;
        for &b in &n_bins {
            offsets.push(acc);
            acc += b;
        }
        offsets.push(acc);
        Self {
            binned,
            params,
            offsets,
            n_bins,
        }
    }

    fn grow(&self, grad: &[f64], hess: &[f64]) -> Tree {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let all_rows: Vec<u32> = (0..self.binned.n_rows() as u32).collect();
        let root = self.pending(0, all_rows, 0, grad, hess);
        let mut finished = Vec::new();
        match self.params.growth {
            Growth::LeafWise => {
                let mut frontier = vec![root];
                let mut n_leaves = 1;
                while n_leaves < self.params.max_leaves {
                    // Largest gain wins; on ties the earliest-created node.
                    let pick = frontier
                        .iter()
                        .enumerate()
                        .filter_map(|(k, p)| p.best.map(|b| (k, b.gain, p.node)))
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
                    let Some((k, _, _)) = pick else { break };
                    let parent = frontier.swap_remove(k);
                    let (l, r) = self.split(parent, &mut nodes, grad, hess);
                    frontier.push(l);
                    frontier.push(r);
                    n_leaves += 1;
                }
                finished.extend(frontier);
            }
            Growth::LevelWise => {
                let mut level = vec![root];
                while !level.is_empty() {
                    let mut next = Vec::new();
                    for p in level {
                        if p.best.is_some() && p.depth < self.params.max_depth {
                            let (l, r) = self.split(p, &mut nodes, grad, hess);
                            next.push(l);
                            next.push(r);
                        } else {
                            finished.push(p);
                        }
                    }
                    level = next;
                }
            }
        }
        for p in finished {
            let w = leaf_weight(p.grad, p.hess, self.params.l1, self.params.l2);
            nodes[p.node] = Node::Leaf {
                value: w * self.params.learning_rate,
            };
        }
        Tree { nodes }
    }

    fn split(
        &self,
        parent: Pending,
        nodes: &mut Vec<Node>,
        grad: &[f64],
        hess: &[f64],
    ) -> (Pending, Pending) {
        let choice = parent.best.expect("split called on unsplittable node");
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = parent
            .rows
            .iter()
            .partition(|&&r| self.binned.row(r as usize)[choice.feature] <= choice.bin);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[parent.node] = Node::Split {
            feature: choice.feature,
            threshold_bin: choice.bin,
            left,
            right,
            gain: choice.gain,
        };
        let depth = parent.depth + 1;
        (
            self.pending(left, left_rows, depth, grad, hess),
            self.pending(right, right_rows, depth, grad, hess),
        )
    }

    fn pending(&self, node: usize, rows: Vec<u32>, depth: usize, grad: &[f64], hess: &[f64]) -> Pending {
        let (mut g, mut h) = (0.0, 0.0);
        for &r in &rows {
            g += grad[r as usize];
            h += hess[r as usize];
        }
        let can_split = match self.params.growth {
            Growth::LeafWise => true,
            Growth::LevelWise => depth < self.params.max_depth,
        };
        let best = if can_split && rows.len() >= 2 {
            self.best_split(&rows, g, h, grad, hess)
        } else {
            None
        };
        Pending {
            node,
            rows,
            grad: g,
            hess: h,
            depth,
            best,
        }
    }

    fn best_split(&self, rows: &[u32], g: f64, h: f64, grad: &[f64], hess: &[f64]) -> Option<SplitChoice> {
        let total = *self.offsets.last().unwrap_or(&0);
        let mut hist_g = vec![0.0; total];
        let mut hist_h = vec![0.0; total];
        let mut hist_n = vec![0u32; total];
        for &r in rows {
            let r = r as usize;
            let (gr, hr) = (grad[r], hess[r]);
            for (f, &b) in self.binned.row(r).iter().enumerate() {
                let k = self.offsets[f] + b as usize;
                hist_g[k] += gr;
                hist_h[k] += hr;
                hist_n[k] += 1;
            }
        }

        let p = self.params;
        let parent_score = node_score(g, h, p.l1, p.l2);
        let n = rows.len() as u32;
        let mut best: Option<SplitChoice> = None;
        for (f, &nb) in self.n_bins.iter().enumerate() {
            let base = self.offsets[f];
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
            for b in 0..nb.saturating_sub(1) {
                gl += hist_g[base + b];
                hl += hist_h[base + b];
                nl += hist_n[base + b];
                if nl == 0 {
                    continue;
                }
                if nl == n {
                    break;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < p.min_child_weight || hr < p.min_child_weight {
                    continue;
                }
                let gain = 0.5
                    * (node_score(gl, hl, p.l1, p.l2) + node_score(gr, hr, p.l1, p.l2) - parent_score)
                    - p.min_split_gain;
                if gain > 0.0 && best.is_none_or(|bst| beats(gain, bst.gain)) {
                    best = Some(SplitChoice {
                        feature: f,
                        bin: b as u32,
                        gain,
                    });
                }
            }
        }
        best
    }
}
