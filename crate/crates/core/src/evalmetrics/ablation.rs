use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitSet;
use crate::error::{Error, Result};
use crate::nnmodel::{accuracy_pair, build_model, train, EncoderBackend, Featurizer, ModelConfig, TrainConfig, Variant};

pub const ABLATION_FILE: &str = "ablation.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub type_acc: f64,
    pub disc_acc: f64,
    /// trainable parameters
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Trains one model per variant with the same seed and settings and scores
/// each on the test split. Ablated branches are absent from the graph.
pub fn run_ablation(
    splits: &SplitSet,
    variants: &[Variant],
    base: &ModelConfig,
    tcfg: &TrainConfig,
    featurizer: &Featurizer,
    encoder: Arc<dyn EncoderBackend>,
) -> Result<AblationTable> {
    if variants.is_empty() {
        return Err(Error::InvalidArgument("at least one variant is required".into()));
    }
    let vocabs = featurizer.fit_vocabs(splits.train.records())?;
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let cfg = vocabs.apply_to(ModelConfig {
            variant,
            ..base.clone()
        });
        let state = build_model(cfg, encoder.clone(), vocabs.clone(), tcfg.seed)?;
        let params = state.parameter_count();
        let (state, _) = train(state, splits, tcfg, featurizer)?;
        let (type_acc, disc_acc) = accuracy_pair(&state, splits.test.records(), featurizer)?;
        rows.push(AblationRow {
            variant,
            type_acc,
            disc_acc,
            params,
        });
    }
    Ok(AblationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let table = AblationTable {
            rows: vec![AblationRow {
                variant: Variant::NoDp,
                type_acc: 0.5,
                disc_acc: 0.75,
                params: 10,
            }],
        };
        assert_eq!(table.to_csv_string().unwrap(), "variant,type_acc,disc_acc,params\nno_dp,0.5,0.75,10\n");
    }
}
