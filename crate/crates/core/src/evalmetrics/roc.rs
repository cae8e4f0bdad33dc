use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ROC curve from `(0, 0)` to `(1, 1)`. `thresholds[i]` is the score cut
/// that produces point `i + 1` (the origin corresponds to "predict nothing").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Sweeps thresholds over the distinct scores in descending order; the
/// area uses the trapezoid rule, so tied scores count as half a win.
pub fn roc_points(y_true: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if y_true.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            what: "scores length".into(),
            expected: y_true.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    let pos = y_true.iter().filter(|&&y| y).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut fpr, mut tpr, mut thresholds) = (vec![0.0], vec![0.0], Vec::new());
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if y_true[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x, y) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let (x0, y0) = (*fpr.last().unwrap(), *tpr.last().unwrap());
        auc += (x - x0) * (y + y0) / 2.0;
        fpr.push(x);
        tpr.push(y);
        thresholds.push(threshold);
    }
    Ok(RocCurve {
        fpr,
        tpr,
        thresholds,
        auc,
    })
}

/// One curve per class: indicator(true == k) against column k.
pub fn roc_one_vs_all(y_true: &[usize], probs: &[Vec<f64>]) -> Result<Vec<RocCurve>> {
    if y_true.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            what: "probability rows".into(),
            expected: y_true.len(),
            found: probs.len(),
        });
    }
    let k = probs.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(Error::InvalidArgument("one-vs-all needs at least two classes".into()));
    }
    if let Some(row) = probs.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch {
            what: "probability row width".into(),
            expected: k,
            found: row.len(),
        });
    }
    if let Some(&bad) = y_true.iter().find(|&&y| y >= k) {
        return Err(Error::UnknownLabel(bad));
    }
    (0..k)
        .map(|c| {
            if !y_true.contains(&c) {
                return Err(Error::ClassAbsent(c));
            }
            let labels: Vec<bool> = y_true.iter().map(|&y| y == c).collect();
            let scores: Vec<f64> = probs.iter().map(|r| r[c]).collect();
            roc_points(&labels, &scores)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn brute_force(y: &[bool], s: &[f64]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (j, &yj) in y.iter().enumerate() {
                if yi && !yj {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        wins += 1.0;
                    } else if s[i] == s[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn three_of_four_pairs() {
        let c = roc_points(&[true, false, true, false], &[0.9, 0.8, 0.7, 0.1]).unwrap();
        assert!((c.auc - 0.75).abs() < 1e-12);
        assert_eq!((c.fpr[0], c.tpr[0]), (0.0, 0.0));
        assert_eq!((*c.fpr.last().unwrap(), *c.tpr.last().unwrap()), (1.0, 1.0));
    }

    #[test]
    fn perfect_ranking() {
        let y = [true, false, false, true];
        let s: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        assert_eq!(roc_points(&y, &s).unwrap().auc, 1.0);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(roc_points(&[true, true], &[0.1, 0.2]), Err(Error::SingleClass)));
    }

    #[test]
    fn random_scores_near_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let y: Vec<bool> = (0..1000).map(|_| rng.random_bool(0.5)).collect();
        let s: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        assert!((roc_points(&y, &s).unwrap().auc - 0.5).abs() < 0.05);
    }

    #[test]
    fn absent_class_rejected() {
        let probs = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1]];
        assert!(matches!(roc_one_vs_all(&[0, 1], &probs), Err(Error::ClassAbsent(2))));
    }

    proptest! {
        #[test]
        fn sweep_matches_pairwise(pairs in proptest::collection::vec((any::<bool>(), 0u8..20), 2..120)) {
            let y: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let s: Vec<f64> = pairs.iter().map(|p| f64::from(p.1) / 20.0).collect();
            let c = roc_points(&y, &s).unwrap();
            prop_assert!((c.auc - brute_force(&y, &s)).abs() < 1e-9);
            prop_assert!(c.fpr.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.tpr.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn two_class_one_vs_all_is_binary(pairs in proptest::collection::vec((any::<bool>(), 0.0f64..1.0), 2..80)) {
            let y: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let probs: Vec<Vec<f64>> = pairs.iter().map(|p| vec![1.0 - p.1, p.1]).collect();
            let ids: Vec<usize> = y.iter().map(|&b| usize::from(b)).collect();
            let curves = roc_one_vs_all(&ids, &probs).unwrap();
            let scores: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assert_eq!(&curves[1], &roc_points(&y, &scores).unwrap());
        }
    }
}
