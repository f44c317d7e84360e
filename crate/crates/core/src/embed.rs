//! Exact t-SNE into two dimensions.
//!
//! 1. Conditional affinities `p_{j|i} ∝ exp(-|x_i - x_j|² / 2σ_i²)`, with each
//!    `σ_i` bisected so the row's perplexity `2^H` hits the target.
//! 2. Symmetrised joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2N`.
//! 3. Student-t (Cauchy) affinities in the embedding,
//!    `q_ij ∝ (1 + |y_i - y_j|²)^-1`, normalised over all ordered pairs.
//! 4. Gradient descent on `KL(P || Q)` with momentum and early exaggeration.
//!
//! Everything is O(N²) in time and memory.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neighbors::sq_euclidean;
use crate::rng_from_seed;

/// Floor applied to `q_ij` inside the KL logarithm.
pub const Q_FLOOR: f64 = 1e-12;
const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const BISECTION_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Iteration at which momentum switches to `final_momentum`.
    pub momentum_switch: usize,
    pub early_exaggeration: f64,
    /// Number of leading iterations run with exaggerated affinities.
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
        }
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("matrix is not square".into()));
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn pairwise_sq_distances<R: AsRef<[f64]>>(x: &[R]) -> SquareMatrix {
    let n = x.len();
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_euclidean(x[i].as_ref(), x[j].as_ref());
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    out
}

/// Result of fitting one point's Gaussian bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaCalibration {
    pub sigma: f64,
    /// `p_{j|i}` for every `j`; the entry at `i` is 0 and the row sums to 1.
    pub conditional: Vec<f64>,
    pub achieved_perplexity: f64,
    /// False when the target perplexity could not be matched within 1e-5
    /// (reported, not fatal).
    pub converged: bool,
}

/// Conditional probabilities and entropy in bits at precision `beta = 1/2σ²`.
/// `shifted` holds `d_j - min d` for `j != i`.
fn conditional_at(shifted: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let weights: Vec<f64> = shifted.iter().map(|&d| (-beta * d).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let mean_d: f64 = probs.iter().zip(shifted).map(|(p, d)| p * d).sum();
    let entropy_nats = z.ln() + beta * mean_d;
    (probs, entropy_nats / std::f64::consts::LN_2)
}

/// Bisects `σ_i` so that the perplexity of row `i` matches `perplexity`.
pub fn calibrate_sigma(sq_dists_row: &[f64], i: usize, perplexity: f64) -> Result<SigmaCalibration> {
    let n = sq_dists_row.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "t-SNE needs at least 3 points, got {n}"
        )));
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::InvalidParameter(format!(
            "perplexity {perplexity} must lie in (1, {n})"
        )));
    }
    let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| sq_dists_row[j]).collect();
    let d_min = others.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = others.iter().map(|d| d - d_min).collect();
    let mean_shift = shifted.iter().sum::<f64>() / shifted.len() as f64;

    let target = perplexity.log2();
    let close = |h: f64| (h.exp2() - perplexity).abs() < PERPLEXITY_TOLERANCE;

    let mut beta = if mean_shift > 0.0 { 1.0 / mean_shift } else { 1.0 };
    let (mut probs, mut h) = conditional_at(&shifted, beta);
    let mut converged = close(h);

    if !converged {
        // Entropy falls as beta grows. Expand geometrically until the target
        // is bracketed by [lo, hi], then bisect in log space.
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        for _ in 0..2100 {
            if h > target {
                lo = beta;
            } else {
                hi = beta;
            }
            if lo > 0.0 && hi.is_finite() {
                break;
            }
            beta = if hi.is_finite() { beta * 0.5 } else { beta * 2.0 };
            if !beta.is_finite() || beta == 0.0 {
                break;
            }
            (probs, h) = conditional_at(&shifted, beta);
            if close(h) {
                converged = true;
                break;
            }
        }
        if !converged && lo > 0.0 && hi.is_finite() {
            for _ in 0..BISECTION_STEPS {
                beta = (lo * hi).sqrt();
                (probs, h) = conditional_at(&shifted, beta);
                if close(h) {
                    converged = true;
                    break;
                }
                if h > target {
                    lo = beta;
                } else {
                    hi = beta;
                }
            }
        }
    }

    let mut conditional = Vec::with_capacity(n);
    let mut it = probs.into_iter();
    for j in 0..n {
        conditional.push(if j == i { 0.0 } else { it.next().unwrap_or(0.0) });
    }
    Ok(SigmaCalibration {
        sigma: (0.5 / beta).sqrt(),
        conditional,
        achieved_perplexity: h.exp2(),
        converged,
    })
}

/// Symmetric joint affinities of the input points.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities {
    pub p: SquareMatrix,
    pub sigma: Vec<f64>,
    pub perplexity: Vec<f64>,
    /// Rows whose bandwidth search missed the target perplexity.
    pub unconverged: Vec<usize>,
}

pub fn joint_affinities<R: AsRef<[f64]> + Sync>(x: &[R], perplexity: f64) -> Result<Affinities> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "t-SNE needs at least 3 points, got {n}"
        )));
    }
    let d = pairwise_sq_distances(x);
    let rows = (0..n)
        .into_par_iter()
        .map(|i| calibrate_sigma(d.row(i), i, perplexity))
        .collect::<Result<Vec<_>>>()?;
    let two_n = 2.0 * n as f64;
    let mut p = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (rows[i].conditional[j] + rows[j].conditional[i]) / two_n;
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    Ok(Affinities {
        p,
        sigma: rows.iter().map(|r| r.sigma).collect(),
        perplexity: rows.iter().map(|r| r.achieved_perplexity).collect(),
        unconverged: rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.converged)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// Student-t kernel `(1 + |y_i - y_j|²)^-1` with a zero diagonal, plus its sum.
fn cauchy_kernel(y: &[[f64; 2]]) -> (SquareMatrix, f64) {
    let n = y.len();
    let mut k = SquareMatrix::zeros(n);
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            k.set(i, j, v);
            k.set(j, i, v);
            total += 2.0 * v;
        }
    }
    (k, total)
}

pub fn low_dim_affinities(y: &[[f64; 2]]) -> SquareMatrix {
    let (mut k, total) = cauchy_kernel(y);
    if total > 0.0 {
        k.data.iter_mut().for_each(|v| *v /= total);
    }
    k
}

/// `Σ p_ij ln(p_ij / q_ij)` over entries with `p_ij > 0`, `q_ij` floored at [`Q_FLOOR`].
pub fn kl_divergence(p: &SquareMatrix, q: &SquareMatrix) -> f64 {
    p.data
        .iter()
        .zip(&q.data)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &qij)| pij * (pij / qij.max(Q_FLOOR)).ln())
        .sum()
}

/// `∂KL/∂y_i = 4 Σ_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|²)^-1`.
pub fn tsne_gradient(p: &SquareMatrix, q: &SquareMatrix, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (kernel, _) = cauchy_kernel(y);
    gradient_with_kernel(p, 1.0, q, &kernel, y)
}

fn gradient_with_kernel(
    p: &SquareMatrix,
    p_scale: f64,
    q: &SquareMatrix,
    kernel: &SquareMatrix,
    y: &[[f64; 2]],
) -> Vec<[f64; 2]> {
    let n = y.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = (p_scale * p.get(i, j) - q.get(i, j)) * kernel.get(i, j);
                g[0] += w * (y[i][0] - y[j][0]);
                g[1] += w * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub y: Vec<[f64; 2]>,
    /// `KL(P || Q)` after each update, on the un-exaggerated `P`.
    pub kl_history: Vec<f64>,
    pub affinities_unconverged: Vec<usize>,
}

impl Embedding {
    /// `y1,y2,label` CSV with a header line.
    pub fn to_csv(&self, labels: &[u8]) -> String {
        let mut out = String::from("y1,y2,label\n");
        for (p, l) in self.y.iter().zip(labels) {
            out.push_str(&format!("{},{},{}\n", p[0], p[1], l));
        }
        out
    }
}

pub fn run_tsne<R: AsRef<[f64]> + Sync>(x: &[R], params: &TsneParams) -> Result<Embedding> {
    if params.iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }
    let aff = joint_affinities(x, params.perplexity)?;
    let n = x.len();
    let mut rng = rng_from_seed(params.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [1e-4 * a, 1e-4 * b]
        })
        .collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut kl_history = Vec::with_capacity(params.iterations);

    for it in 0..params.iterations {
        let (kernel, total) = cauchy_kernel(&y);
        let q = normalized(&kernel, total);
        if it > 0 {
            kl_history.push(kl_divergence(&aff.p, &q));
        }
        let exaggeration = if it < params.exaggeration_iterations {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < params.momentum_switch {
            params.initial_momentum
        } else {
            params.final_momentum
        };
        let grad = gradient_with_kernel(&aff.p, exaggeration, &q, &kernel, &y);
        for ((yi, vi), gi) in y.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            for d in 0..2 {
                vi[d] = momentum * vi[d] - params.learning_rate * gi[d];
                yi[d] += vi[d];
            }
        }
        recenter(&mut y);
    }
    let q = low_dim_affinities(&y);
    kl_history.push(kl_divergence(&aff.p, &q));

    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "embedding diverged; lower the learning rate".into(),
        ));
    }
    Ok(Embedding {
        y,
        kl_history,
        affinities_unconverged: aff.unconverged,
    })
}

fn normalized(kernel: &SquareMatrix, total: f64) -> SquareMatrix {
    let mut q = kernel.clone();
    if total > 0.0 {
        q.data.iter_mut().for_each(|v| *v /= total);
    }
    q
}

fn recenter(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mut mean = [0.0; 2];
    for p in y.iter() {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    for p in y.iter_mut() {
        p[0] -= mean[0];
        p[1] -= mean[1];
    }
}
