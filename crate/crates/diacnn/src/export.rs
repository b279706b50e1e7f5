//! CSV renderings of histories, metrics, reports, ROC curves and embeddings.

use std::fmt::Write;

use diacnn_core::eval::{ClassificationReport, ConfusionMatrix, Metrics, RocCurve};
use diacnn_core::train::History;
use serde::Deserialize;

use crate::error::{Error, Result};

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,lr";
pub const UNDEFINED: &str = "undefined";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string())
}

pub fn history_csv(h: &History) -> String {
    let mut s = format!("{HISTORY_HEADER}\n");
    for r in &h.records {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

pub fn parse_history(text: &str) -> Result<Vec<HistoryRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Config(format!("history.csv: {e}")))
}

/// `metric,value` rows; percentages, `undefined` for zero denominators.
pub fn metrics_csv(m: &Metrics, aucs: &[(String, f64)]) -> String {
    let mut s = String::from("metric,value\n");
    for (name, v) in [("sen", m.sen), ("spec", m.spec), ("acc", m.acc), ("preci", m.preci), ("f1", m.f1)] {
        let _ = writeln!(s, "{name},{}", opt(v));
    }
    for (name, v) in aucs {
        let _ = writeln!(s, "{name},{v}");
    }
    s
}

/// Two-class table: predictions in rows, ground truth in columns.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    format!(
        ",Actually positive,Actually negative\nPredicted positive,{},{}\nPredicted negative,{},{}\n",
        cm.tp, cm.fp, cm.fn_, cm.tn
    )
}

/// Multi-class counts: `table[p][a]` predictions of class `p` whose label is `a`.
pub fn confusion_table_csv(table: &[Vec<usize>], names: &[String]) -> String {
    let mut s = String::new();
    for n in names {
        let _ = write!(s, ",Actually {n}");
    }
    s.push('\n');
    for (row, n) in table.iter().zip(names) {
        let _ = write!(s, "Predicted {n}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Columns Recall, Precision, F1 score, Support; fractions in `[0, 1]`.
pub fn report_csv(r: &ClassificationReport) -> String {
    let mut s = String::from(",Recall,Precision,F1 score,Support\n");
    for row in &r.rows {
        let _ = writeln!(s, "{},{},{},{},{}", row.name, opt(row.recall), opt(row.precision), opt(row.f1), row.support);
    }
    let _ = writeln!(s, "Accuracy,,,{},{}", r.accuracy, r.macro_avg.support);
    for (name, a) in [("Macro avg.", &r.macro_avg), ("Weighted avg.", &r.weighted_avg)] {
        let _ = writeln!(s, "{name},{},{},{},{}", opt(a.recall), opt(a.precision), opt(a.f1), a.support);
    }
    s
}

pub const ROC_HEADER: &str = "class,threshold,fpr,tpr";

pub fn roc_csv(curves: &[(String, RocCurve)]) -> String {
    let mut s = format!("{ROC_HEADER}\n");
    for (name, c) in curves {
        for (t, (fpr, tpr)) in c.thresholds.iter().zip(&c.points) {
            let _ = writeln!(s, "{name},{t},{fpr},{tpr}");
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct RocRow {
    pub class: String,
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

pub fn parse_roc(text: &str) -> Result<Vec<RocRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Config(format!("roc.csv: {e}")))
}

/// Penultimate-layer features: `index,label,f0,f1,...`.
pub fn features_csv(features: &[Vec<f32>], labels: &[usize]) -> String {
    let d = features.first().map_or(0, Vec::len);
    let mut s = String::from("index,label");
    for j in 0..d {
        let _ = write!(s, ",f{j}");
    }
    s.push('\n');
    for (i, (f, l)) in features.iter().zip(labels).enumerate() {
        let _ = write!(s, "{i},{l}");
        for v in f {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_features(text: &str) -> Result<(Vec<f64>, usize, Vec<usize>)> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let d = rdr.headers().map_err(|e| Error::Config(format!("features.csv: {e}")))?.len().saturating_sub(2);
    let (mut x, mut labels) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Config(format!("features.csv: {e}")))?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("features.csv: {e}")));
        labels.push(num(&rec[1])? as usize);
        for v in rec.iter().skip(2) {
            x.push(num(v)?);
        }
    }
    Ok((x, d, labels))
}

pub fn tsne_csv(coords: &[[f64; 2]], labels: &[usize]) -> String {
    let mut s = String::from("index,label,x,y\n");
    for (i, (c, l)) in coords.iter().zip(labels).enumerate() {
        let _ = writeln!(s, "{i},{l},{},{}", c[0], c[1]);
    }
    s
}
