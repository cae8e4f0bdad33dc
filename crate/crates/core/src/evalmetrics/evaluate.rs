use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{classification_report, confusion_matrix, ClassReport, ConfusionMatrix};
use super::roc::{roc_one_vs_all, roc_points, RocCurve};
use crate::corpus::{Corpus, InfoType};
use crate::error::{Error, Result};
use crate::nnmodel::{predict_batch, Featurizer, ModelState};

pub const METRICS_FILE: &str = "metrics.json";
pub const DISCLOSURE_LABELS: [&str; 2] = ["non_disclosure", "disclosure"];

/// Everything written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_samples: usize,
    pub type_report: ClassReport,
    pub disclosure_report: ClassReport,
    pub type_confusion: ConfusionMatrix,
    pub disclosure_confusion: ConfusionMatrix,
    /// One-vs-all, in class order.
    pub type_roc: Vec<RocCurve>,
    pub disclosure_roc: RocCurve,
}

impl EvaluationReport {
    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Scores both heads on a labeled test corpus.
pub fn evaluate_model(state: &ModelState, test: &Corpus, featurizer: &Featurizer) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("test corpus is empty".into()));
    }
    let records = test.records();
    let preds = predict_batch(state, records, featurizer)?;

    let mut y_type = Vec::with_capacity(records.len());
    let mut y_disc = Vec::with_capacity(records.len());
    for r in records {
        y_type.push(r.info_type.index());
        y_disc.push(r.disclosure.ok_or_else(|| Error::Unlabeled(r.id.clone()))?);
    }
    let p_type: Vec<usize> = preds.iter().map(|p| p.info_type.index()).collect();
    let p_disc: Vec<usize> = preds.iter().map(|p| usize::from(p.disclosure)).collect();
    let y_disc_ids: Vec<usize> = y_disc.iter().map(|&d| usize::from(d)).collect();

    let type_labels: Vec<&str> = InfoType::ALL.iter().map(|t| t.as_str()).collect();
    let type_confusion = confusion_matrix(&y_type, &p_type, &type_labels)?;
    let disclosure_confusion = confusion_matrix(&y_disc_ids, &p_disc, &DISCLOSURE_LABELS)?;
    let probs: Vec<Vec<f64>> = preds.iter().map(|p| p.prediction.type_probs.clone()).collect();
    let disc_scores: Vec<f64> = preds.iter().map(|p| p.prediction.disclosure_prob).collect();

    Ok(EvaluationReport {
        n_samples: records.len(),
        type_report: classification_report(&type_confusion)?,
        disclosure_report: classification_report(&disclosure_confusion)?,
        type_confusion,
        disclosure_confusion,
        type_roc: roc_one_vs_all(&y_type, &probs)?,
        disclosure_roc: roc_points(&y_disc, &disc_scores)?,
    })
}
