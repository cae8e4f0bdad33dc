use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }
}

/// Counts `(true, predicted)` pairs. Values index into `labels`.
pub fn confusion_matrix<S: AsRef<str>>(y_true: &[usize], y_pred: &[usize], labels: &[S]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            what: "y_pred length".into(),
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if let Some(&bad) = [t, p].iter().find(|&&v| v >= k) {
            return Err(Error::UnknownLabel(bad));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        labels: labels.iter().map(|l| l.as_ref().to_string()).collect(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when no sample was predicted as this class (precision reported as 0).
    pub precision_undefined: bool,
    /// Set when the class has no true samples (recall reported as 0).
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Per-class precision, recall and F1 plus macro averages and accuracy.
/// A zero denominator yields 0 and sets the matching `*_undefined` flag.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassReport> {
    let k = cm.labels.len();
    let total = cm.total();
    if k == 0 || total == 0 {
        return Err(Error::EmptyMatrix);
    }
    if cm.counts.len() != k || cm.counts.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch {
            what: "confusion matrix width".into(),
            expected: k,
            found: cm.counts.len(),
        });
    }
    let classes: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let (precision, precision_undefined) = ratio(tp, cm.col_sum(c));
            let (recall, recall_undefined) = ratio(tp, cm.row_sum(c));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: cm.labels[c].clone(),
                precision,
                recall,
                f1,
                support: cm.row_sum(c),
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / k as f64;
    let trace: u64 = (0..k).map(|c| cm.counts[c][c]).sum();
    Ok(ClassReport {
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        accuracy: trace as f64 / total as f64,
        total,
        classes,
    })
}
