use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::confusion::confusion_matrix;
use super::EvalError;

/// Fractions in `[0, 1]`; `None` where the denominator is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub name: String,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub support: usize,
}

/// Per-class rows plus accuracy, macro and support-weighted averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub rows: Vec<ClassRow>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
}

fn ratio(num: usize, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num as f64 / den)
}

/// Averages each column over the rows where it is defined, weighting row
/// `i` by `weight(i)`. Weights are renormalized over the defined rows.
fn average(rows: &[ClassRow], weight: impl Fn(&ClassRow) -> f64) -> Averages {
    let col = |f: fn(&ClassRow) -> Option<f64>| {
        let (mut num, mut den) = (0.0, 0.0);
        for r in rows {
            if let Some(v) = f(r) {
                num += weight(r) * v;
                den += weight(r);
            }
        }
        (den > 0.0).then(|| num / den)
    };
    Averages {
        recall: col(|r| r.recall),
        precision: col(|r| r.precision),
        f1: col(|r| r.f1),
        support: rows.iter().map(|r| r.support).sum(),
    }
}

/// One-vs-rest recall, precision and F1 for every class in `class_names`.
pub fn classification_report(preds: &[usize], labels: &[usize], class_names: &[String]) -> Result<ClassificationReport, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch(preds.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let k = class_names.len();
    if let Some(&bad) = labels.iter().chain(preds).find(|&&l| l >= k) {
        return Err(EvalError::LabelOutOfRange { label: bad, classes: k });
    }
    let rows: Vec<ClassRow> = class_names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let cm = confusion_matrix(preds, labels, c)?;
            Ok(ClassRow {
                name: name.clone(),
                recall: ratio(cm.tp, (cm.tp + cm.fn_) as f64),
                precision: ratio(cm.tp, (cm.tp + cm.fp) as f64),
                f1: ratio(cm.tp, cm.tp as f64 + 0.5 * (cm.fp + cm.fn_) as f64),
                support: cm.tp + cm.fn_,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(ClassificationReport {
        accuracy: correct as f64 / labels.len() as f64,
        macro_avg: average(&rows, |_| 1.0),
        weighted_avg: average(&rows, |r| r.support as f64),
        rows,
    })
}
