//! Independent reference computations used by the integration and
//! acceptance suites. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use fraudlab_core::gbdt::{GbdtModel, GbdtParams, Node};
use fraudlab_core::Dataset;

/// `P(s+ > s-) + ½ P(s+ = s-)` over every positive/negative pair.
pub fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// `(tp, fp, fn, tn)` by four separate filtering passes.
pub fn recount(labels: &[u8], scores: &[f64], threshold: f64) -> (usize, usize, usize, usize) {
    let pairs: Vec<(u8, bool)> = labels
        .iter()
        .zip(scores)
        .map(|(&l, &s)| (l, s >= threshold))
        .collect();
    let count = |l: u8, p: bool| pairs.iter().filter(|&&(a, b)| a == l && b == p).count();
    (count(1, true), count(0, true), count(1, false), count(0, false))
}

pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Indices sorted by `(squared distance, index)`, excluding `skip`, first `k`.
pub fn brute_neighbors(points: &[Vec<f64>], query: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, p)| {
            let d: f64 = p.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
            (d, i)
        })
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Mean silhouette coefficient of 2-D points under the given cluster ids.
pub fn silhouette(points: &[[f64; 2]], ids: &[usize]) -> f64 {
    let n = points.len();
    let k = ids.iter().max().map_or(0, |m| m + 1);
    let dist = |a: usize, b: usize| {
        ((points[a][0] - points[b][0]).powi(2) + (points[a][1] - points[b][1]).powi(2)).sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if j != i {
                sums[ids[j]] += dist(i, j);
                counts[ids[j]] += 1;
            }
        }
        let own = ids[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

/// Outcome of replaying every split of a boosted model against brute force.
#[derive(Debug, Default)]
pub struct SplitAudit {
    pub splits_checked: usize,
    /// Splits whose `(feature, bin)` equals the brute-force argmax exactly.
    pub exact_matches: usize,
    /// Splits that differ from the argmax yet have a gain within 1e-9 of it.
    pub near_ties: usize,
    pub failures: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn soft(g: f64, alpha: f64) -> f64 {
    g.signum() * (g.abs() - alpha).max(0.0)
}

fn score(g: f64, h: f64, p: &GbdtParams) -> f64 {
    soft(g, p.l1).powi(2) / (h + p.l2)
}

/// Bin index of `x` against ascending `edges`: the number of edges below `x`.
pub fn bin_of(edges: &[f64], x: f64) -> u32 {
    edges.iter().filter(|&&e| e < x).count() as u32
}

fn route(nodes: &[Node], bins: &[u32]) -> Vec<usize> {
    let mut path = vec![0];
    let mut id = 0;
    while let Node::Split {
        feature,
        threshold_bin,
        left,
        right,
        ..
    } = nodes[id]
    {
        id = if bins[feature] <= threshold_bin {
            left
        } else {
            right
        };
        path.push(id);
    }
    path
}

/// For every split of every tree, recomputes the gain of all `(feature, bin)`
/// candidates on the rows reaching that node and checks the chosen split is
/// the maximiser (ties to lowest feature, then lowest bin).
pub fn audit_splits(model: &GbdtModel, train: &Dataset, params: &GbdtParams) -> SplitAudit {
    let d = train.n_features();
    let bins: Vec<Vec<u32>> = train
        .rows()
        .map(|r| (0..d).map(|j| bin_of(model.bin_mapper.edges(j), r[j])).collect())
        .collect();
    let y: Vec<f64> = train.labels().iter().map(|&l| f64::from(l)).collect();
    let mut margins = vec![model.base_score; train.n_rows()];
    let mut audit = SplitAudit::default();

    for (t, tree) in model.trees.iter().enumerate() {
        let g: Vec<f64> = margins.iter().zip(&y).map(|(&m, &yy)| sigmoid(m) - yy).collect();
        let h: Vec<f64> = margins.iter().map(|&m| sigmoid(m) * (1.0 - sigmoid(m))).collect();
        let paths: Vec<Vec<usize>> = bins.iter().map(|b| route(&tree.nodes, b)).collect();

        for (id, node) in tree.nodes.iter().enumerate() {
            let Node::Split {
                feature,
                threshold_bin,
                ..
            } = *node
            else {
                continue;
            };
            let rows: Vec<usize> = (0..train.n_rows()).filter(|&i| paths[i].contains(&id)).collect();
            let gain_of = |f: usize, b: u32| -> Option<f64> {
                let (mut gl, mut hl, mut nl, mut gr, mut hr, mut nr) = (0.0, 0.0, 0, 0.0, 0.0, 0);
                for &i in &rows {
                    if bins[i][f] <= b {
                        gl += g[i];
                        hl += h[i];
                        nl += 1;
                    } else {
                        gr += g[i];
                        hr += h[i];
                        nr += 1;
                    }
                }
                if nl == 0 || nr == 0 || hl < params.min_child_weight || hr < params.min_child_weight {
                    return None;
                }
                Some(
                    0.5 * (score(gl, hl, params) + score(gr, hr, params) - score(gl + gr, hl + hr, params))
                        - params.min_split_gain,
                )
            };
            let mut best: Option<(usize, u32, f64)> = None;
            for f in 0..d {
                let n_bins = model.bin_mapper.edges(f).len() as u32 + 1;
                for b in 0..n_bins - 1 {
                    if let Some(gain) = gain_of(f, b) {
                        // gains equal up to round-off are ties (e.g. the same two
                        // row sets swapped between left and right)
                        if best.is_none_or(|(_, _, bg)| gain - bg > 1e-12 * bg.abs()) {
                            best = Some((f, b, gain));
                        }
                    }
                }
            }
            audit.splits_checked += 1;
            let Some((bf, bb, bg)) = best else {
                audit
                    .failures
                    .push(format!("tree {t} node {id}: no valid candidate"));
                continue;
            };
            let Some(chosen) = gain_of(feature, threshold_bin) else {
                audit
                    .failures
                    .push(format!("tree {t} node {id}: chosen split is invalid"));
                continue;
            };
            let tol = 1e-9 * bg.abs().max(1.0);
            if (bf, bb) == (feature, threshold_bin) {
                audit.exact_matches += 1;
            } else if (bg - chosen).abs() <= tol {
                audit.near_ties += 1;
            } else {
                audit.failures.push(format!(
                    "tree {t} node {id}: chose ({feature},{threshold_bin}) gain {chosen}, best ({bf},{bb}) gain {bg}"
                ));
            }
            if bg <= 0.0 {
                audit
                    .failures
                    .push(format!("tree {t} node {id}: best gain {bg} not positive"));
            }
        }
        for (i, path) in paths.iter().enumerate() {
            if let Node::Leaf { value } = tree.nodes[*path.last().unwrap()] {
                margins[i] += value;
            }
        }
    }
    audit
}

/// Deterministic xorshift stream for building fixtures without the crate's RNG.
pub struct Stream(u64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize
    }
}

/// Noisy two-moons style table with `n` rows and 2 features.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut s = Stream::new(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = std::f64::consts::PI * s.uniform();
        let (x, y, l) = if i % 2 == 0 {
            (t.cos(), t.sin(), 0)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        rows.push(vec![x + noise * s.normal(), y + noise * s.normal()]);
        labels.push(l);
    }
    Dataset::new(vec!["x".into(), "y".into()], rows, labels).unwrap()
}

/// Random table where the label depends on a noisy rule over the first two columns.
pub fn random_table(n: usize, d: usize, seed: u64) -> Dataset {
    let mut s = Stream::new(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..d).map(|_| s.normal()).collect();
        let z = row[0] - 0.7 * row[1.min(d - 1)] + 0.8 * s.normal();
        labels.push(u8::from(z > 0.3 || i == 0));
        rows.push(row);
    }
    labels[1] = 0;
    let names = (0..d).map(|j| format!("f{j}")).collect();
    Dataset::new(names, rows, labels).unwrap()
}
