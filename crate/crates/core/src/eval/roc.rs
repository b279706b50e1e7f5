use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// `points[i]` is `(fpr, tpr)` when predicting positive for scores `>= thresholds[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

/// Sweeps the distinct scores from high to low after a `+inf` threshold
/// that predicts nothing positive. Tied scores move together as one point.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::InvalidArgument("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = alloc::vec![(0.0, 0.0)];
    let mut thresholds = alloc::vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(t);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve.points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by direct pair enumeration.
pub fn mann_whitney(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let (mut wins, mut pairs) = (0.0, 0usize);
    for (_, &si) in scores.iter().enumerate().filter(|(i, _)| labels[*i]) {
        for (_, &sj) in scores.iter().enumerate().filter(|(j, _)| !labels[*j]) {
            pairs += 1;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    if pairs == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok(wins / pairs as f64)
}

/// One-vs-rest curve for `class` from row-major `n×k` probabilities.
pub fn ovr_roc(probs: &[f64], k: usize, labels: &[usize], class: usize) -> Result<RocCurve, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidArgument("need at least two classes".into()));
    }
    if probs.len() != labels.len() * k {
        return Err(EvalError::LengthMismatch(probs.len() / k, labels.len()));
    }
    if class >= k || !labels.contains(&class) {
        return Err(EvalError::ClassAbsent(class));
    }
    let scores: Vec<f64> = probs.chunks_exact(k).map(|row| row[class]).collect();
    let bin: Vec<bool> = labels.iter().map(|&l| l == class).collect();
    roc_curve(&scores, &bin)
}
