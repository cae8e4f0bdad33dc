use serde::{Deserialize, Serialize};

use super::model::Prediction;
use crate::error::{Error, Result};

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before logs.
pub const PROB_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// `cce + bce`
    pub total: f64,
    /// mean categorical cross entropy of the information-type head
    pub cce: f64,
    /// mean binary cross entropy of the disclosure head
    pub bce: f64,
}

pub(crate) fn clip(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

pub(crate) fn in_clip_range(p: f64) -> bool {
    p > PROB_CLIP && p < 1.0 - PROB_CLIP
}

/// Unweighted sum of the two heads' mean cross entropies.
pub fn joint_loss(preds: &[Prediction], y_type: &[usize], y_disc: &[bool]) -> Result<LossParts> {
    if preds.len() != y_type.len() || preds.len() != y_disc.len() {
        return Err(Error::DimensionMismatch {
            what: "loss labels".into(),
            expected: preds.len(),
            found: y_type.len().min(y_disc.len()),
        });
    }
    if preds.is_empty() {
        return Ok(LossParts {
            total: 0.0,
            cce: 0.0,
            bce: 0.0,
        });
    }
    let n = preds.len() as f64;
    let mut cce = 0.0;
    let mut bce = 0.0;
    for ((p, &t), &d) in preds.iter().zip(y_type).zip(y_disc) {
        let p_true = *p.type_probs.get(t).ok_or(Error::UnknownLabel(t))?;
        cce -= clip(p_true).ln();
        let q = clip(p.disclosure_prob);
        bce -= if d { q.ln() } else { (1.0 - q).ln() };
    }
    let cce = cce / n;
    let bce = bce / n;
    Ok(LossParts {
        total: cce + bce,
        cce,
        bce,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(type_probs: Vec<f64>, disclosure_prob: f64) -> Prediction {
        Prediction {
            type_probs,
            disclosure_prob,
        }
    }

    #[test]
    fn perfect_predictions_have_near_zero_loss() {
        let preds = vec![pred(vec![1.0, 0.0, 0.0], 1.0), pred(vec![0.0, 0.0, 1.0], 0.0)];
        let loss = joint_loss(&preds, &[0, 2], &[true, false]).unwrap();
        // only the clip epsilon remains: 2 * -ln(1 - 1e-7)
        assert!(loss.total < 3e-7, "{loss:?}");
        assert!(loss.total >= 0.0);
    }

    #[test]
    fn uniform_type_probs_give_ln3() {
        let third = 1.0 / 3.0;
        let preds: Vec<_> = (0..5).map(|_| pred(vec![third; 3], 0.5)).collect();
        let loss = joint_loss(&preds, &[0, 1, 2, 0, 1], &[true, false, true, true, false]).unwrap();
        assert!((loss.cce - 3f64.ln()).abs() < 1e-12);
        assert!((loss.cce - 1.0986).abs() < 1e-4);
        assert!((loss.bce - 2f64.ln()).abs() < 1e-12);
        assert!((loss.bce - 0.6931).abs() < 1e-4);
        assert_eq!(loss.total, loss.cce + loss.bce);
    }

    #[test]
    fn zero_probability_is_clipped() {
        let loss = joint_loss(&[pred(vec![0.0, 1.0, 0.0], 1.0)], &[0], &[false]).unwrap();
        let expect = -(PROB_CLIP.ln()) * 2.0;
        assert!((loss.total - expect).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(joint_loss(&[pred(vec![1.0, 0.0, 0.0], 1.0)], &[0, 1], &[true]).is_err());
    }
}
