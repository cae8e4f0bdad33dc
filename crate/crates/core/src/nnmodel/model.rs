use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::encoder::EncoderBackend;
use super::featurize::{BatchFeatures, Vocabs};
use super::layers::{
    dense, dense_backward, dropout_mask, glorot_uniform, relu, sequence_backward, sequence_forward, sigmoid,
    softmax_rows, truncated_normal, SequenceParams, SequenceTrace,
};
use super::loss::{in_clip_range, joint_loss, LossParts};
use super::train::History;
use crate::error::{Error, Result};
use crate::util::{derived_rng, seeded_rng};

/// A named collection of parameter (or gradient) matrices in a fixed order.
pub trait TensorSet {
    fn tensors(&self) -> Vec<(String, &Array2<f64>)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub kernel: Array2<f64>,
    /// `1 × units`
    pub bias: Array2<f64>,
}

impl DenseParams {
    fn zeros_like(&self) -> DenseParams {
        DenseParams {
            kernel: Array2::zeros(self.kernel.raw_dim()),
            bias: Array2::zeros(self.bias.raw_dim()),
        }
    }
}

/// Every trainable parameter. Ablated branches are absent, not zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub sequence: Option<SequenceParams>,
    pub meta: Option<DenseParams>,
    pub type_head: DenseParams,
    pub disclosure_head: DenseParams,
}

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            sequence: self.sequence.as_ref().map(SequenceParams::zeros_like),
            meta: self.meta.as_ref().map(DenseParams::zeros_like),
            type_head: self.type_head.zeros_like(),
            disclosure_head: self.disclosure_head.zeros_like(),
        }
    }
}

impl TensorSet for Params {
    fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        if let Some(seq) = &self.sequence {
            out.push(("dp_embedding".to_string(), &seq.embedding));
            out.push(("dp_lstm_kernel".to_string(), &seq.kernel));
            out.push(("dp_lstm_recurrent".to_string(), &seq.recurrent));
            out.push(("dp_lstm_bias".to_string(), &seq.bias));
        }
        if let Some(meta) = &self.meta {
            out.push(("meta_dense_kernel".to_string(), &meta.kernel));
            out.push(("meta_dense_bias".to_string(), &meta.bias));
        }
        out.push(("type_head_kernel".to_string(), &self.type_head.kernel));
        out.push(("type_head_bias".to_string(), &self.type_head.bias));
        out.push(("disclosure_head_kernel".to_string(), &self.disclosure_head.kernel));
        out.push(("disclosure_head_bias".to_string(), &self.disclosure_head.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = Vec::new();
        if let Some(seq) = &mut self.sequence {
            out.push(("dp_embedding".to_string(), &mut seq.embedding));
            out.push(("dp_lstm_kernel".to_string(), &mut seq.kernel));
            out.push(("dp_lstm_recurrent".to_string(), &mut seq.recurrent));
            out.push(("dp_lstm_bias".to_string(), &mut seq.bias));
        }
        if let Some(meta) = &mut self.meta {
            out.push(("meta_dense_kernel".to_string(), &mut meta.kernel));
            out.push(("meta_dense_bias".to_string(), &mut meta.bias));
        }
        out.push(("type_head_kernel".to_string(), &mut self.type_head.kernel));
        out.push(("type_head_bias".to_string(), &mut self.type_head.bias));
        out.push(("disclosure_head_kernel".to_string(), &mut self.disclosure_head.kernel));
        out.push(("disclosure_head_bias".to_string(), &mut self.disclosure_head.bias));
        out
    }
}

/// Output of both heads for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub type_probs: Vec<f64>,
    pub disclosure_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Deterministic; dropout disabled.
    Eval,
    /// Dropout active with a mask drawn from `dropout_seed`.
    Train { dropout_seed: u64 },
}

/// A batch whose encoder outputs are already computed. Since the encoder is
/// frozen its outputs can be cached across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedBatch {
    /// `B × encoder_out_dim`
    pub pooled: Array2<f64>,
    pub dp_ids: Vec<Vec<u32>>,
    /// `B × meta_in_dim`
    pub meta: Array2<f64>,
    /// class index per row; empty for unlabeled batches
    pub y_type: Vec<usize>,
    pub y_disc: Vec<bool>,
}

impl PreparedBatch {
    pub fn len(&self) -> usize {
        self.pooled.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_labeled(&self) -> bool {
        !self.y_type.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> PreparedBatch {
        PreparedBatch {
            pooled: self.pooled.select(Axis(0), rows),
            dp_ids: rows.iter().map(|&r| self.dp_ids[r].clone()).collect(),
            meta: self.meta.select(Axis(0), rows),
            y_type: if self.is_labeled() {
                rows.iter().map(|&r| self.y_type[r]).collect()
            } else {
                Vec::new()
            },
            y_disc: if self.is_labeled() {
                rows.iter().map(|&r| self.y_disc[r]).collect()
            } else {
                Vec::new()
            },
        }
    }
}

struct ForwardCache {
    concat: Array2<f64>,
    trace: Option<SequenceTrace>,
    meta_pre: Option<Array2<f64>>,
    type_probs: Array2<f64>,
    disc_probs: Vec<f64>,
}

impl ForwardCache {
    fn predictions(&self) -> Vec<Prediction> {
        self.type_probs
            .rows()
            .into_iter()
            .zip(&self.disc_probs)
            .map(|(row, &q)| Prediction {
                type_probs: row.to_vec(),
                disclosure_prob: q,
            })
            .collect()
    }
}

/// Trainable parameters plus everything needed to featurize and predict.
#[derive(Clone)]
pub struct ModelState {
    pub config: ModelConfig,
    pub params: Params,
    pub vocabs: Vocabs,
    /// Settings of the last training run (defaults before training).
    pub train_config: TrainConfig,
    pub history: History,
    encoder: Arc<dyn EncoderBackend>,
}

impl std::fmt::Debug for ModelState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelState")
            .field("config", &self.config)
            .field("encoder", &self.encoder.name())
            .field("trainable_parameters", &self.params.parameter_count())
            .finish()
    }
}

fn check_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected,
            found,
        })
    }
}

/// Builds the network with seeded initial weights.
///
/// Head kernels come from a truncated normal with `head_init_std`; dense and
/// recurrent kernels use Glorot-uniform, the recurrent matrix is orthogonal
/// and the tag embedding uniform in ±0.05. Biases start at zero except the
/// LSTM forget gate, which starts at one. Each tensor draws from its own
/// stream, so ablation variants share the initial values of the branches
/// they keep.
pub fn build_model(
    config: ModelConfig,
    encoder: Arc<dyn EncoderBackend>,
    vocabs: Vocabs,
    seed: u64,
) -> Result<ModelState> {
    config.validate()?;
    check_dim("encoder output", config.encoder_out_dim, encoder.output_dim())?;
    check_dim("dp_vocab_size", config.dp_vocab_size, vocabs.tags.len())?;
    check_dim("meta_in_dim", config.meta_in_dim, vocabs.devices.one_hot_dim())?;

    let sequence = config.variant.uses_dp().then(|| {
        SequenceParams::init(
            config.dp_vocab_size,
            config.dp_embed_dim,
            config.recurrent_units,
            &mut derived_rng(seed, "init/dp"),
        )
    });
    let meta = config.variant.uses_metadata().then(|| DenseParams {
        kernel: glorot_uniform(
            config.meta_in_dim,
            config.meta_dense_units,
            &mut derived_rng(seed, "init/meta"),
        ),
        bias: Array2::zeros((1, config.meta_dense_units)),
    });
    let width = config.concat2_dim();
    let type_head = DenseParams {
        kernel: truncated_normal(
            width,
            config.n_info_types,
            config.head_init_std,
            &mut derived_rng(seed, "init/type_head"),
        ),
        bias: Array2::zeros((1, config.n_info_types)),
    };
    let disclosure_head = DenseParams {
        kernel: truncated_normal(width, 1, config.head_init_std, &mut derived_rng(seed, "init/disclosure_head")),
        bias: Array2::zeros((1, 1)),
    };
    Ok(ModelState {
        config,
        params: Params {
            sequence,
            meta,
            type_head,
            disclosure_head,
        },
        vocabs,
        train_config: TrainConfig::default(),
        history: History::default(),
        encoder,
    })
}

impl ModelState {
    pub(crate) fn from_parts(
        config: ModelConfig,
        params: Params,
        vocabs: Vocabs,
        train_config: TrainConfig,
        history: History,
        encoder: Arc<dyn EncoderBackend>,
    ) -> Self {
        ModelState {
            config,
            params,
            vocabs,
            train_config,
            history,
            encoder,
        }
    }

    pub fn encoder(&self) -> &Arc<dyn EncoderBackend> {
        &self.encoder
    }

    pub fn parameter_count(&self) -> usize {
        self.params.parameter_count()
    }

    /// Validates shapes and runs the frozen encoder.
    pub fn prepare(&self, batch: &BatchFeatures) -> Result<PreparedBatch> {
        let cfg = &self.config;
        let b = batch.len();
        check_dim("attention_mask rows", b, batch.attention_mask.len())?;
        check_dim("dp_ids rows", b, batch.dp_ids.len())?;
        check_dim("meta_one_hot rows", b, batch.meta_one_hot.len())?;
        let labeled = !batch.y_type.is_empty() || !batch.y_disc.is_empty();
        if labeled {
            check_dim("y_type rows", b, batch.y_type.len())?;
            check_dim("y_disc rows", b, batch.y_disc.len())?;
        }
        let inputs = batch.encoder_inputs();
        for (i, input) in inputs.iter().enumerate() {
            check_dim("token_ids length", cfg.max_len, input.token_ids.len())?;
            check_dim("attention_mask length", cfg.max_len, input.attention_mask.len())?;
            check_dim("dp_ids length", cfg.dp_max_len, batch.dp_ids[i].len())?;
            check_dim("meta_one_hot length", cfg.meta_in_dim, batch.meta_one_hot[i].len())?;
            if let Some(&bad) = batch.dp_ids[i].iter().find(|&&id| id as usize >= cfg.dp_vocab_size) {
                return Err(Error::DimensionMismatch {
                    what: "dp tag id".into(),
                    expected: cfg.dp_vocab_size,
                    found: bad as usize,
                });
            }
        }
        let pooled_rows = self.encoder.encode_batch(&inputs)?;
        let mut pooled = Array2::zeros((b, cfg.encoder_out_dim));
        for (r, row) in pooled_rows.iter().enumerate() {
            check_dim("encoder output", cfg.encoder_out_dim, row.len())?;
            pooled.row_mut(r).assign(&ndarray::ArrayView1::from(row.as_slice()));
        }
        let meta = Array2::from_shape_fn((b, cfg.meta_in_dim), |(r, c)| f64::from(batch.meta_one_hot[r][c]));
        let (y_type, y_disc) = if labeled {
            let mut y_type = Vec::with_capacity(b);
            for row in &batch.y_type {
                check_dim("y_type width", cfg.n_info_types, row.len())?;
                let ones: Vec<usize> = row.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| i).collect();
                if ones.len() != 1 || row.iter().any(|&v| v > 1) {
                    return Err(Error::InvalidArgument("y_type rows must be one-hot".into()));
                }
                y_type.push(ones[0]);
            }
            let y_disc = batch
                .y_disc
                .iter()
                .map(|&v| match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(Error::UnknownLabel(usize::from(other))),
                })
                .collect::<Result<Vec<_>>>()?;
            (y_type, y_disc)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(PreparedBatch {
            pooled,
            dp_ids: batch.dp_ids.clone(),
            meta,
            y_type,
            y_disc,
        })
    }

    pub fn forward(&self, batch: &BatchFeatures, mode: ForwardMode) -> Result<Vec<Prediction>> {
        let prepared = self.prepare(batch)?;
        self.forward_prepared(&prepared, mode)
    }

    pub fn forward_prepared(&self, batch: &PreparedBatch, mode: ForwardMode) -> Result<Vec<Prediction>> {
        Ok(self.forward_cached(batch, mode)?.predictions())
    }

    fn forward_cached(&self, batch: &PreparedBatch, mode: ForwardMode) -> Result<ForwardCache> {
        let cfg = &self.config;
        check_dim("pooled width", cfg.encoder_out_dim, batch.pooled.ncols())?;
        check_dim("meta width", cfg.meta_in_dim, batch.meta.ncols())?;
        let b = batch.len();

        let encoded = match mode {
            ForwardMode::Eval => batch.pooled.clone(),
            ForwardMode::Train { dropout_seed } => {
                let mask = dropout_mask(b, cfg.encoder_out_dim, cfg.dropout_rate, &mut seeded_rng(dropout_seed));
                &batch.pooled * &mask
            }
        };
        let mut parts = vec![encoded];

        let trace = match &self.params.sequence {
            Some(seq) => {
                let (h, trace) = sequence_forward(seq, &batch.dp_ids);
                parts.push(h);
                Some(trace)
            }
            None => None,
        };
        let meta_pre = match &self.params.meta {
            Some(meta) => {
                let pre = dense(&batch.meta, &meta.kernel, &meta.bias);
                parts.push(relu(&pre));
                Some(pre)
            }
            None => None,
        };
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        let concat = concatenate(Axis(1), &views).expect("branch outputs share the batch dimension");
        debug_assert_eq!(concat.ncols(), cfg.concat2_dim());

        let type_logits = dense(&concat, &self.params.type_head.kernel, &self.params.type_head.bias);
        let type_probs = softmax_rows(&type_logits);
        let disc_logits = dense(&concat, &self.params.disclosure_head.kernel, &self.params.disclosure_head.bias);
        let disc_probs = disc_logits.column(0).iter().map(|&z| sigmoid(z)).collect();
        Ok(ForwardCache {
            concat,
            trace,
            meta_pre,
            type_probs,
            disc_probs,
        })
    }

    /// Joint loss and its exact gradient with respect to every trainable
    /// parameter (probability clipping included).
    pub fn loss_and_gradients(&self, batch: &PreparedBatch, mode: ForwardMode) -> Result<(LossParts, Params)> {
        self.loss_gradients_predictions(batch, mode).map(|(l, g, _)| (l, g))
    }

    pub(crate) fn loss_gradients_predictions(
        &self,
        batch: &PreparedBatch,
        mode: ForwardMode,
    ) -> Result<(LossParts, Params, Vec<Prediction>)> {
        if !batch.is_labeled() {
            return Err(Error::InvalidArgument("loss needs a labeled batch".into()));
        }
        let cache = self.forward_cached(batch, mode)?;
        let preds = cache.predictions();
        let loss = joint_loss(&preds, &batch.y_type, &batch.y_disc)?;

        let b = batch.len();
        let n = b as f64;
        let k = self.config.n_info_types;

        let mut d_type_logits = Array2::<f64>::zeros((b, k));
        for (r, &t) in batch.y_type.iter().enumerate() {
            let p = cache.type_probs[[r, t]];
            if !in_clip_range(p) {
                continue;
            }
            // d(-ln p_t)/dz_j = p_j - [j == t]
            let g = -1.0 / (n * p);
            for j in 0..k {
                let pj = cache.type_probs[[r, j]];
                let indicator = if j == t { 1.0 } else { 0.0 };
                d_type_logits[[r, j]] = g * p * (indicator - pj);
            }
        }
        let mut d_disc_logits = Array2::<f64>::zeros((b, 1));
        for (r, &y) in batch.y_disc.iter().enumerate() {
            let q = cache.disc_probs[r];
            if !in_clip_range(q) {
                continue;
            }
            let g = if y { -1.0 / (n * q) } else { 1.0 / (n * (1.0 - q)) };
            d_disc_logits[[r, 0]] = g * q * (1.0 - q);
        }

        let mut grads = self.params.zeros_like();
        let (dw, db, d_concat_t) = dense_backward(&cache.concat, &self.params.type_head.kernel, &d_type_logits);
        grads.type_head.kernel = dw;
        grads.type_head.bias = db;
        let (dw, db, d_concat_d) =
            dense_backward(&cache.concat, &self.params.disclosure_head.kernel, &d_disc_logits);
        grads.disclosure_head.kernel = dw;
        grads.disclosure_head.bias = db;
        let d_concat = d_concat_t + d_concat_d;

        let mut offset = self.config.encoder_out_dim;
        if let (Some(seq), Some(trace)) = (&self.params.sequence, &cache.trace) {
            let units = seq.units();
            let d_h = d_concat.slice(s![.., offset..offset + units]).to_owned();
            grads.sequence = Some(sequence_backward(seq, &batch.dp_ids, trace, &d_h));
            offset += units;
        }
        if let (Some(meta), Some(pre)) = (&self.params.meta, &cache.meta_pre) {
            let units = meta.kernel.ncols();
            let mut d_pre = d_concat.slice(s![.., offset..offset + units]).to_owned();
            ndarray::Zip::from(&mut d_pre)
                .and(pre)
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
            let (dw, db, _) = dense_backward(&batch.meta, &meta.kernel, &d_pre);
            grads.meta = Some(DenseParams { kernel: dw, bias: db });
        }
        Ok((loss, grads, preds))
    }
}
