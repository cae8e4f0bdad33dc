//! Text-only disclosure baselines: bag-of-words logistic regression and a
//! word-level recurrent classifier. Both train with the run's optimizer
//! settings and are scored on the same test split as the main model.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::evaluate::DISCLOSURE_LABELS;
use super::report::{classification_report, confusion_matrix, ClassReport, ConfusionMatrix};
use crate::corpus::{SplitSet, TweetRecord};
use crate::error::{Error, Result};
use crate::nnmodel::layers::{
    column, dense, dense_backward, glorot_uniform, sequence_backward, sequence_forward, sigmoid, SequenceParams,
};
use crate::nnmodel::{clip_global_norm, Adam, DenseParams, ModelConfig, TensorSet, TrainConfig};
use crate::textprep::clean_text;
use crate::util::derived_rng;

pub const BASELINE_FILE: &str = "baselines.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub name: String,
    pub accuracy: f64,
    pub report: ClassReport,
    pub confusion: ConfusionMatrix,
}

struct BaselineParams {
    sequence: Option<SequenceParams>,
    head: DenseParams,
}

impl TensorSet for BaselineParams {
    fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        if let Some(s) = &self.sequence {
            out.push(("embedding".into(), &s.embedding));
            out.push(("lstm_kernel".into(), &s.kernel));
            out.push(("lstm_recurrent".into(), &s.recurrent));
            out.push(("lstm_bias".into(), &s.bias));
        }
        out.push(("head_kernel".into(), &self.head.kernel));
        out.push(("head_bias".into(), &self.head.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = Vec::new();
        if let Some(s) = &mut self.sequence {
            out.push(("embedding".into(), &mut s.embedding));
            out.push(("lstm_kernel".into(), &mut s.kernel));
            out.push(("lstm_recurrent".into(), &mut s.recurrent));
            out.push(("lstm_bias".into(), &mut s.bias));
        }
        out.push(("head_kernel".into(), &mut self.head.kernel));
        out.push(("head_bias".into(), &mut self.head.bias));
        out
    }
}

fn words(record: &TweetRecord) -> Result<Vec<String>> {
    Ok(clean_text(&record.text)?.words().map(str::to_lowercase).collect())
}

fn labels(records: &[TweetRecord]) -> Result<Vec<bool>> {
    records
        .iter()
        .map(|r| r.disclosure.ok_or_else(|| Error::Unlabeled(r.id.clone())))
        .collect()
}

/// Gradient of the mean binary cross entropy with respect to the logits,
/// zero where the probability is clipped.
fn bce_logit_grad(q: &[f64], y: &[bool]) -> Array2<f64> {
    let n = q.len() as f64;
    let g: Vec<f64> = q
        .iter()
        .zip(y)
        .map(|(&q, &y)| {
            if crate::nnmodel::PROB_CLIP < q && q < 1.0 - crate::nnmodel::PROB_CLIP {
                (q - f64::from(u8::from(y))) / n
            } else {
                0.0
            }
        })
        .collect();
    column(&g)
}

fn fit<F>(params: &mut BaselineParams, n: usize, tcfg: &TrainConfig, label: &str, mut grads_for: F) -> Result<()>
where
    F: FnMut(&BaselineParams, &[usize]) -> BaselineParams,
{
    let mut adam = Adam::new(tcfg.learning_rate, tcfg.adam_epsilon);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..tcfg.epochs {
        order.shuffle(&mut derived_rng(tcfg.seed, &format!("{label}/shuffle/{epoch}")));
        for rows in order.chunks(tcfg.batch_size) {
            let mut grads = grads_for(params, rows);
            if !grads.tensors().iter().all(|(_, g)| g.iter().all(|v| v.is_finite())) {
                return Err(Error::NonFiniteLoss {
                    step: adam.steps_taken() as usize,
                });
            }
            clip_global_norm(&mut grads, tcfg.gradient_clip_norm);
            adam.step(params, &grads);
        }
    }
    Ok(())
}

fn result(name: &str, truth: &[bool], probs: &[f64]) -> Result<BaselineResult> {
    let t: Vec<usize> = truth.iter().map(|&b| usize::from(b)).collect();
    let p: Vec<usize> = probs.iter().map(|&q| usize::from(q >= 0.5)).collect();
    let confusion = confusion_matrix(&t, &p, &DISCLOSURE_LABELS)?;
    let report = classification_report(&confusion)?;
    Ok(BaselineResult {
        name: name.to_string(),
        accuracy: report.accuracy,
        report,
        confusion,
    })
}

fn check_splits(splits: &SplitSet) -> Result<()> {
    if splits.train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    if splits.test.is_empty() {
        return Err(Error::InvalidArgument("test split is empty".into()));
    }
    Ok(())
}

/// Term-count vectors and a single sigmoid unit.
pub fn baseline_bow(splits: &SplitSet, tcfg: &TrainConfig) -> Result<BaselineResult> {
    tcfg.validate()?;
    check_splits(splits)?;
    let train_words = splits.train.records().iter().map(words).collect::<Result<Vec<_>>>()?;
    let vocab: BTreeMap<&str, usize> = {
        let mut distinct: Vec<&str> = train_words.iter().flatten().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().enumerate().map(|(i, w)| (w, i)).collect()
    };
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let counts = |docs: &[Vec<String>]| {
        let mut x = Array2::<f64>::zeros((docs.len(), vocab.len()));
        for (r, doc) in docs.iter().enumerate() {
            for w in doc {
                if let Some(&c) = vocab.get(w.as_str()) {
                    x[[r, c]] += 1.0;
                }
            }
        }
        x
    };
    let x_train = counts(&train_words);
    let y_train = labels(splits.train.records())?;

    let mut params = BaselineParams {
        sequence: None,
        head: DenseParams {
            kernel: Array2::zeros((vocab.len(), 1)),
            bias: Array2::zeros((1, 1)),
        },
    };
    fit(&mut params, x_train.nrows(), tcfg, "bow", |p, rows| {
        let x = x_train.select(Axis(0), rows);
        let y: Vec<bool> = rows.iter().map(|&r| y_train[r]).collect();
        let q: Vec<f64> = dense(&x, &p.head.kernel, &p.head.bias).iter().map(|&z| sigmoid(z)).collect();
        let (dw, db, _) = dense_backward(&x, &p.head.kernel, &bce_logit_grad(&q, &y));
        BaselineParams {
            sequence: None,
            head: DenseParams { kernel: dw, bias: db },
        }
    })?;

    let test_words = splits.test.records().iter().map(words).collect::<Result<Vec<_>>>()?;
    let x_test = counts(&test_words);
    let q: Vec<f64> = dense(&x_test, &params.head.kernel, &params.head.bias)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    result("bow", &labels(splits.test.records())?, &q)
}

/// Trainable word embedding, a recurrent layer (final state) and a sigmoid
/// unit over token ids only. Sizes follow `cfg` (max_len, dp_embed_dim,
/// recurrent_units).
pub fn baseline_rnn(splits: &SplitSet, cfg: &ModelConfig, tcfg: &TrainConfig) -> Result<BaselineResult> {
    tcfg.validate()?;
    check_splits(splits)?;
    let train_words = splits.train.records().iter().map(words).collect::<Result<Vec<_>>>()?;
    // 0 = pad, 1 = unknown word
    let vocab: BTreeMap<&str, u32> = {
        let mut distinct: Vec<&str> = train_words.iter().flatten().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().zip(2u32..).collect()
    };
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let encode = |doc: &[String]| {
        let mut ids: Vec<u32> = doc
            .iter()
            .take(cfg.max_len)
            .map(|w| vocab.get(w.as_str()).copied().unwrap_or(1))
            .collect();
        ids.resize(cfg.max_len, 0);
        ids
    };
    let ids_train: Vec<Vec<u32>> = train_words.iter().map(|d| encode(d)).collect();
    let y_train = labels(splits.train.records())?;

    let mut params = BaselineParams {
        sequence: Some(SequenceParams::init(
            vocab.len() + 2,
            cfg.dp_embed_dim,
            cfg.recurrent_units,
            &mut derived_rng(tcfg.seed, "rnn/init/sequence"),
        )),
        head: DenseParams {
            kernel: glorot_uniform(cfg.recurrent_units, 1, &mut derived_rng(tcfg.seed, "rnn/init/head")),
            bias: Array2::zeros((1, 1)),
        },
    };
    fit(&mut params, ids_train.len(), tcfg, "rnn", |p, rows| {
        let seq = p.sequence.as_ref().expect("recurrent baseline has a sequence branch");
        let ids: Vec<Vec<u32>> = rows.iter().map(|&r| ids_train[r].clone()).collect();
        let y: Vec<bool> = rows.iter().map(|&r| y_train[r]).collect();
        let (h, trace) = sequence_forward(seq, &ids);
        let q: Vec<f64> = dense(&h, &p.head.kernel, &p.head.bias).iter().map(|&z| sigmoid(z)).collect();
        let (dw, db, dh) = dense_backward(&h, &p.head.kernel, &bce_logit_grad(&q, &y));
        BaselineParams {
            sequence: Some(sequence_backward(seq, &ids, &trace, &dh)),
            head: DenseParams { kernel: dw, bias: db },
        }
    })?;

    let test_words = splits.test.records().iter().map(words).collect::<Result<Vec<_>>>()?;
    let ids_test: Vec<Vec<u32>> = test_words.iter().map(|d| encode(d)).collect();
    let (h, _) = sequence_forward(params.sequence.as_ref().expect("sequence branch"), &ids_test);
    let q: Vec<f64> = dense(&h, &params.head.kernel, &params.head.bias)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    result("rnn", &labels(splits.test.records())?, &q)
}

/// Writes baseline results as a JSON array.
pub fn save_baselines(results: &[BaselineResult], path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(results)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
