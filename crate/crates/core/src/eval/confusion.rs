use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Binary counts; the positive class is chosen by the caller.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Rows predicted, columns actual: `[[tp, fp], [fn, tn]]`.
    pub fn table(&self) -> [[usize; 2]; 2] {
        [[self.tp, self.fp], [self.fn_, self.tn]]
    }
}

/// Counts predictions against labels, treating `positive` as the positive
/// class and every other value as negative.
pub fn confusion_matrix(preds: &[usize], labels: &[usize], positive: usize) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch(preds.len(), labels.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p == positive, y == positive) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Percentages; `None` where the denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sen: Option<f64>,
    pub spec: Option<f64>,
    pub acc: Option<f64>,
    pub preci: Option<f64>,
    pub f1: Option<f64>,
}

fn pct(num: usize, den: f64) -> Option<f64> {
    (den > 0.0).then(|| 100.0 * num as f64 / den)
}

/// Sensitivity, specificity, accuracy, precision and F1 (`tp / (tp + (fp + fn) / 2)`), all × 100.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let ConfusionMatrix { tp, fp, fn_, tn } = *cm;
    Metrics {
        sen: pct(tp, (tp + fn_) as f64),
        spec: pct(tn, (tn + fp) as f64),
        acc: pct(tp + tn, cm.total() as f64),
        preci: pct(tp, (tp + fp) as f64),
        f1: pct(tp, tp as f64 + 0.5 * (fp + fn_) as f64),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulticlassMetrics {
    /// One-vs-rest metrics per class.
    pub per_class: Vec<Metrics>,
    /// Unweighted mean of each per-class metric over the classes where it is defined.
    pub macro_avg: Metrics,
    /// Share of exactly correct predictions.
    pub accuracy: Option<f64>,
}

pub fn multiclass_metrics(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<MulticlassMetrics, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch(preds.len(), labels.len()));
    }
    let per_class: Vec<Metrics> = (0..num_classes)
        .map(|k| confusion_matrix(preds, labels, k).map(|cm| metrics(&cm)))
        .collect::<Result<_, _>>()?;
    let mean = |f: fn(&Metrics) -> Option<f64>| {
        let vals: Vec<f64> = per_class.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let macro_avg = Metrics {
        sen: mean(|m| m.sen),
        spec: mean(|m| m.spec),
        acc: mean(|m| m.acc),
        preci: mean(|m| m.preci),
        f1: mean(|m| m.f1),
    };
    let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(MulticlassMetrics { per_class, macro_avg, accuracy: pct(correct, labels.len() as f64) })
}

/// Index of the largest entry in each row of a row-major `n×k` matrix;
/// the first maximum wins ties.
pub fn argmax_rows(scores: &[f64], k: usize) -> Vec<usize> {
    scores
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
