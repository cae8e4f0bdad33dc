use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::featurize::{BatchFeatures, Featurizer};
use super::loss::{joint_loss, LossParts};
use super::model::{ForwardMode, ModelState, Prediction, PreparedBatch};
use super::optim::{clip_global_norm, Adam};
use crate::corpus::{InfoType, SplitSet, TweetRecord};
use crate::error::{Error, Result};
use crate::util::{derived_rng, fnv1a};

/// Metrics of one training epoch. Train figures are running averages over
/// the epoch's mini-batches (dropout active); validation figures are
/// computed in eval mode after the epoch and absent for an empty split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub train_cce: f64,
    pub train_bce: f64,
    pub train_type_acc: f64,
    pub train_disc_acc: f64,
    pub val_loss: Option<f64>,
    pub val_type_acc: Option<f64>,
    pub val_disc_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Argmax with ties going to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn disclosure_label(prob: f64) -> bool {
    prob >= 0.5
}

fn correct_counts(preds: &[Prediction], y_type: &[usize], y_disc: &[bool]) -> (usize, usize) {
    preds.iter().zip(y_type).zip(y_disc).fold((0, 0), |(t, d), ((p, &yt), &yd)| {
        (
            t + usize::from(argmax(&p.type_probs) == yt),
            d + usize::from(disclosure_label(p.disclosure_prob) == yd),
        )
    })
}

fn step_seed(seed: u64, epoch: usize, step: usize) -> u64 {
    fnv1a(format!("dropout/{seed}/{epoch}/{step}").as_bytes())
}

fn prepare_records(state: &ModelState, records: &[TweetRecord], featurizer: &Featurizer) -> Result<PreparedBatch> {
    let batch = featurizer.batch(records, &state.vocabs, state.config.n_info_types)?;
    state.prepare(&batch)
}

/// Trains every layer after the frozen encoder.
///
/// Runs `epochs × ceil(N / batch_size)` Adam steps with global-norm
/// gradient clipping. Encoder outputs are computed once and reused, the
/// training order is reshuffled each epoch from the seed, and each step's
/// dropout mask has its own derived seed, so a run is a pure function of
/// its inputs.
pub fn train(
    mut state: ModelState,
    splits: &SplitSet,
    tcfg: &TrainConfig,
    featurizer: &Featurizer,
) -> Result<(ModelState, History)> {
    tcfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let train_set = prepare_records(&state, splits.train.records(), featurizer)?;
    if !train_set.is_labeled() {
        return Err(Error::Unlabeled(
            "every training record needs a disclosure label".into(),
        ));
    }
    let val_set = if splits.validation.is_empty() {
        None
    } else {
        Some(prepare_records(&state, splits.validation.records(), featurizer)?)
    };

    let mut adam = Adam::new(tcfg.learning_rate, tcfg.adam_epsilon);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    let mut global_step = 0usize;

    for epoch in 0..tcfg.epochs {
        order.shuffle(&mut derived_rng(tcfg.seed, &format!("shuffle/{epoch}")));
        let mut sums = LossParts {
            total: 0.0,
            cce: 0.0,
            bce: 0.0,
        };
        let (mut type_hits, mut disc_hits, mut seen) = (0usize, 0usize, 0usize);
        let mut steps = 0;
        for (i, rows) in order.chunks(tcfg.batch_size).enumerate() {
            let batch = train_set.select(rows);
            let mode = ForwardMode::Train {
                dropout_seed: step_seed(tcfg.seed, epoch, i),
            };
            let (loss, mut grads, preds) = state.loss_gradients_predictions(&batch, mode)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFiniteLoss { step: global_step });
            }
            let n = batch.len() as f64;
            sums.total += loss.total * n;
            sums.cce += loss.cce * n;
            sums.bce += loss.bce * n;
            let (t, d) = correct_counts(&preds, &batch.y_type, &batch.y_disc);
            type_hits += t;
            disc_hits += d;
            seen += batch.len();

            clip_global_norm(&mut grads, tcfg.gradient_clip_norm);
            adam.step(&mut state.params, &grads);
            steps += 1;
            global_step += 1;
        }

        let seen_f = seen as f64;
        let (val_loss, val_type_acc, val_disc_acc) = match &val_set {
            Some(v) => {
                let preds = state.forward_prepared(v, ForwardMode::Eval)?;
                let loss = joint_loss(&preds, &v.y_type, &v.y_disc)?;
                let (t, d) = correct_counts(&preds, &v.y_type, &v.y_disc);
                let n = v.len() as f64;
                (Some(loss.total), Some(t as f64 / n), Some(d as f64 / n))
            }
            None => (None, None, None),
        };
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            steps,
            train_loss: sums.total / seen_f,
            train_cce: sums.cce / seen_f,
            train_bce: sums.bce / seen_f,
            train_type_acc: type_hits as f64 / seen_f,
            train_disc_acc: disc_hits as f64 / seen_f,
            val_loss,
            val_type_acc,
            val_disc_acc,
        });
    }
    state.train_config = tcfg.clone();
    state.history = history.clone();
    Ok((state, history))
}

/// Eval-mode joint loss over `records`.
pub fn evaluate_loss(state: &ModelState, records: &[TweetRecord], featurizer: &Featurizer) -> Result<LossParts> {
    let prepared = prepare_records(state, records, featurizer)?;
    if !prepared.is_labeled() {
        return Err(Error::Unlabeled("loss needs disclosure labels".into()));
    }
    let preds = state.forward_prepared(&prepared, ForwardMode::Eval)?;
    joint_loss(&preds, &prepared.y_type, &prepared.y_disc)
}

/// Decoded output of both heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedLabel {
    pub info_type: InfoType,
    pub disclosure: bool,
    #[serde(flatten)]
    pub prediction: Prediction,
}

impl PredictedLabel {
    /// Highest type probability wins (lowest index on ties); disclosure is
    /// positive iff its probability is at least 0.5.
    pub fn from_prediction(prediction: Prediction) -> Result<PredictedLabel> {
        let k = argmax(&prediction.type_probs);
        Ok(PredictedLabel {
            info_type: InfoType::from_index(k).ok_or(Error::UnknownLabel(k))?,
            disclosure: disclosure_label(prediction.disclosure_prob),
            prediction,
        })
    }
}

pub fn predict(state: &ModelState, record: &TweetRecord, featurizer: &Featurizer) -> Result<PredictedLabel> {
    let mut out = predict_batch(state, std::slice::from_ref(record), featurizer)?;
    Ok(out.remove(0))
}

pub fn predict_batch(
    state: &ModelState,
    records: &[TweetRecord],
    featurizer: &Featurizer,
) -> Result<Vec<PredictedLabel>> {
    let features = featurizer.featurize_all(records, &state.vocabs)?;
    // Labels are irrelevant here; drop them so unlabeled input works.
    let mut batch = BatchFeatures::from_records(&features, state.config.n_info_types);
    batch.y_type.clear();
    batch.y_disc.clear();
    state
        .forward(&batch, ForwardMode::Eval)?
        .into_iter()
        .map(PredictedLabel::from_prediction)
        .collect()
}

/// (information-type accuracy, disclosure accuracy) over labeled records.
pub fn accuracy_pair(state: &ModelState, records: &[TweetRecord], featurizer: &Featurizer) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to score".into()));
    }
    let preds = predict_batch(state, records, featurizer)?;
    let mut type_hits = 0usize;
    let mut disc_hits = 0usize;
    for (p, r) in preds.iter().zip(records) {
        let truth = r
            .disclosure
            .ok_or_else(|| Error::Unlabeled(format!("record `{}` has no disclosure label", r.id)))?;
        type_hits += usize::from(p.info_type == r.info_type);
        disc_hits += usize::from(p.disclosure == truth);
    }
    let n = records.len() as f64;
    Ok((type_hits as f64 / n, disc_hits as f64 / n))
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
    fn argmax_picks_highest() {
        let p = PredictedLabel::from_prediction(pred(vec![0.2, 0.5, 0.3], 0.1)).unwrap();
        assert_eq!(p.info_type, InfoType::Finance);
        assert!(!p.disclosure);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn half_is_disclosure() {
        let p = PredictedLabel::from_prediction(pred(vec![1.0, 0.0, 0.0], 0.5)).unwrap();
        assert!(p.disclosure);
    }
}
