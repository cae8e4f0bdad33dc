//! The hybrid multi-input, multi-output network.
//!
//! ```text
//! token ids, mask ─► frozen encoder ─► dropout ───────────┐
//! dep-tag ids ─► embedding(16) ─► LSTM(32, last state) ───┴► concat(800) ─┐
//! one-hot metadata ─► dense(32, relu) ────────────────────────────────────┴► concat(832)
//!                                                     ├► dense(3, softmax)  information type
//!                                                     └► dense(1, sigmoid)  disclosure
//! ```
//!
//! Only the layers after the encoder train. Gradients are computed by hand
//! (no autodiff), in `f64`.

mod checkpoint;
mod config;
mod encoder;
mod featurize;
pub mod layers;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, BackendInfo, CHECKPOINT_FILES};
pub use featurize::{DEVICE_VOCAB_FILE, TAG_VOCAB_FILE};
pub use config::{ModelConfig, TrainConfig, Variant};
pub use encoder::{EncoderBackend, StubEncoder};
pub use featurize::{BatchFeatures, Featurizer, RecordFeatures, Vocabs};
pub use loss::{joint_loss, LossParts, PROB_CLIP};
pub use model::{
    build_model, DenseParams, ForwardMode, ModelState, Params, Prediction, PreparedBatch, TensorSet,
};
pub use optim::{clip_global_norm, Adam};
pub use train::{accuracy_pair, evaluate_loss, predict, predict_batch, train, EpochRecord, History, PredictedLabel};
