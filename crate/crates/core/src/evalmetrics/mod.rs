//! Classification reports, confusion matrices, ROC curves, baselines and the
//! ablation harness.

mod ablation;
mod baseline;
mod evaluate;
mod report;
mod roc;

pub use ablation::{run_ablation, AblationRow, AblationTable, ABLATION_FILE};
pub use baseline::{baseline_bow, baseline_rnn, save_baselines, BaselineResult, BASELINE_FILE};
pub use evaluate::{evaluate_model, EvaluationReport, DISCLOSURE_LABELS, METRICS_FILE};
pub use report::{classification_report, confusion_matrix, ClassMetrics, ClassReport, ConfusionMatrix};
pub use roc::{roc_one_vs_all, roc_points, RocCurve};
