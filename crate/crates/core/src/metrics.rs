//! Confusion counts, precision/recall/F1 for the positive class, and ROC analysis.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn check_pair(labels: &[u8], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Counts with the rule `predicted positive <=> score >= threshold`.
pub fn confusion(labels: &[u8], scores: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    check_pair(labels, scores)?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &s) in labels.iter().zip(scores) {
        match (y == 1, s >= threshold) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

/// `(precision, recall, f1)`, each 0 when its denominator is 0.
pub fn prf1(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let tp = cm.tp as f64;
    let precision = ratio(tp, tp + cm.fp as f64);
    let recall = ratio(tp, tp + cm.fn_ as f64);
    (precision, recall, f1_from(precision, recall))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC vertices from `(0, 0)` to `(1, 1)`, one per distinct score.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Two-column `fpr,tpr` CSV without a header.
    pub fn to_csv(&self) -> String {
        self.points
            .iter()
            .map(|p| format!("{},{}\n", p.fpr, p.tpr))
            .collect()
    }

    /// Trapezoidal area under the vertices.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
            .sum()
    }
}

/// Cumulative `(false positives, true positives)` after each distinct score,
/// plus the positive and negative totals.
type Steps = (Vec<(usize, usize)>, usize, usize);

/// Scans scores from high to low.
fn score_steps(labels: &[u8], scores: &[f64]) -> Result<Steps> {
    check_pair(labels, scores)?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!("score {s} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut steps = Vec::new();
    let (mut fp, mut tp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        steps.push((fp, tp));
    }
    Ok((steps, positives, negatives))
}

pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<RocCurve> {
    let (steps, p, n) = score_steps(labels, scores)?;
    let mut points = Vec::with_capacity(steps.len() + 2);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0 });
    points.extend(steps.iter().map(|&(fp, tp)| RocPoint {
        fpr: fp as f64 / n as f64,
        tpr: tp as f64 / p as f64,
    }));
    points.push(RocPoint { fpr: 1.0, tpr: 1.0 });
    Ok(RocCurve { points })
}

/// Trapezoidal ROC AUC.
///
/// The area is accumulated in pair counts (`ΔFP · (TP_prev + TP_cur) / 2`) and
/// divided once at the end, which makes it identical to the Mann–Whitney
/// statistic with ties counted as one half.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (steps, p, n) = score_steps(labels, scores)?;
    let mut twice_area: u128 = 0;
    let (mut prev_fp, mut prev_tp) = (0usize, 0usize);
    for (fp, tp) in steps {
        twice_area += ((fp - prev_fp) * (prev_tp + tp)) as u128;
        prev_fp = fp;
        prev_tp = tp;
    }
    Ok(twice_area as f64 / (2.0 * p as f64 * n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate(labels: &[u8], scores: &[f64], threshold: f64) -> Result<MetricsReport> {
    let cm = confusion(labels, scores, threshold)?;
    let (precision, recall, f1) = prf1(&cm);
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        roc_auc: roc_auc(labels, scores)?,
        threshold,
        confusion: cm,
    })
}
