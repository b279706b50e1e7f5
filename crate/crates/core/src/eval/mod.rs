//! Classification metrics, ROC analysis and t-SNE.

mod confusion;
mod error;
mod report;
mod roc;
pub mod tsne;

pub use confusion::{argmax_rows, confusion_matrix, metrics, multiclass_metrics, ConfusionMatrix, Metrics, MulticlassMetrics};
pub use error::EvalError;
pub use report::{classification_report, Averages, ClassRow, ClassificationReport};
pub use roc::{auc, mann_whitney, ovr_roc, roc_curve, RocCurve};
pub use tsne::{conditional_p, joint_p, tsne, Embedding2D, TsneConfig};
