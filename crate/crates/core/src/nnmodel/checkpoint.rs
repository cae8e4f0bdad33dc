//! Checkpoint directory: `weights.bin`, `config.json`, `dp_tags.txt`,
//! `devices.txt`, `history.json` and `backends.json`.
//!
//! `weights.bin` layout (little endian): the magic `PDISCW01`, a `u32`
//! tensor count, then per tensor a `u32` name length, the UTF-8 name, `u64`
//! rows, `u64` cols and `rows * cols` `f64` values in row-major order. A
//! SHA-256 digest of all preceding bytes closes the file.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ModelConfig, TrainConfig};
use super::encoder::EncoderBackend;
use super::featurize::{Featurizer, Vocabs, DEVICE_VOCAB_FILE, TAG_VOCAB_FILE};
use super::model::{build_model, ModelState, TensorSet};
use super::train::History;
use crate::error::{Error, Result};

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const CONFIG_FILE: &str = "config.json";
pub const HISTORY_FILE: &str = "history.json";
pub const BACKENDS_FILE: &str = "backends.json";

pub const CHECKPOINT_FILES: [&str; 6] = [
    WEIGHTS_FILE,
    CONFIG_FILE,
    TAG_VOCAB_FILE,
    DEVICE_VOCAB_FILE,
    HISTORY_FILE,
    BACKENDS_FILE,
];

const MAGIC: &[u8; 8] = b"PDISCW01";

/// Which backends produced the checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub encoder: String,
    pub encoder_dim: usize,
    pub encoder_checksum: String,
    pub tokenizer: String,
    pub parser: String,
}

impl BackendInfo {
    pub fn load(dir: &Path) -> Result<BackendInfo> {
        read_json(&dir.join(BACKENDS_FILE))
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigSnapshot {
    #[serde(flatten)]
    model: ModelConfig,
    #[serde(flatten)]
    train: TrainConfig,
}

fn corrupt(file: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptCheckpoint {
        file: file.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| corrupt(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn encode_weights<T: TensorSet>(params: &T) -> Vec<u8> {
    let tensors = params.tensors();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        buf.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(self.file, "truncated tensor data"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode_weights(bytes: &[u8], file: &Path) -> Result<Vec<(String, Array2<f64>)>> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt(file, "not a weights file"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt(file, "checksum mismatch"));
    }
    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
        file,
    };
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| corrupt(file, "tensor name is not UTF-8"))?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows.checked_mul(cols).ok_or_else(|| corrupt(file, "tensor too large"))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| corrupt(file, "tensor too large"))?)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Array2::from_shape_vec((rows, cols), values).map_err(|e| corrupt(file, e.to_string()))?;
        out.push((name, t));
    }
    if r.pos != body.len() {
        return Err(corrupt(file, "trailing bytes after tensors"));
    }
    Ok(out)
}

/// Writes every checkpoint file into `dir`, creating it if needed.
pub fn save_checkpoint(state: &ModelState, featurizer: &Featurizer, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let weights = dir.join(WEIGHTS_FILE);
    fs::write(&weights, encode_weights(&state.params)).map_err(|e| Error::io(&weights, e))?;
    write_json(
        &dir.join(CONFIG_FILE),
        &ConfigSnapshot {
            model: state.config.clone(),
            train: state.train_config.clone(),
        },
    )?;
    state.vocabs.save(dir)?;
    write_json(&dir.join(HISTORY_FILE), &state.history)?;
    let encoder = state.encoder();
    write_json(
        &dir.join(BACKENDS_FILE),
        &BackendInfo {
            encoder: encoder.name(),
            encoder_dim: encoder.output_dim(),
            encoder_checksum: encoder.parameter_checksum(),
            tokenizer: featurizer.tokenizer().name(),
            parser: featurizer.parser().name(),
        },
    )
}

/// Restores a checkpoint around `encoder`, which must match the one it was
/// trained with.
pub fn load_checkpoint(dir: &Path, encoder: Arc<dyn EncoderBackend>) -> Result<ModelState> {
    for name in CHECKPOINT_FILES {
        let path: PathBuf = dir.join(name);
        if !path.is_file() {
            return Err(Error::MissingCheckpointFile(path));
        }
    }
    let snapshot: ConfigSnapshot = read_json(&dir.join(CONFIG_FILE))?;
    let config = snapshot.model;
    if encoder.output_dim() != config.encoder_out_dim {
        return Err(Error::DimensionMismatch {
            what: "encoder output".into(),
            expected: config.encoder_out_dim,
            found: encoder.output_dim(),
        });
    }
    let backends = BackendInfo::load(dir)?;
    let checksum = encoder.parameter_checksum();
    if backends.encoder_checksum != checksum {
        return Err(Error::EncoderMismatch {
            expected: format!("{} ({})", backends.encoder, backends.encoder_checksum),
            found: format!("{} ({checksum})", encoder.name()),
        });
    }
    let vocabs = Vocabs::load(dir)?;
    let history: History = read_json(&dir.join(HISTORY_FILE))?;

    let weights_path = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
    let stored = decode_weights(&bytes, &weights_path)?;

    let skeleton = build_model(config.clone(), encoder.clone(), vocabs.clone(), 0)
        .map_err(|e| corrupt(&dir.join(CONFIG_FILE), e.to_string()))?;
    let mut params = skeleton.params;
    {
        let mut slots = params.tensors_mut();
        if slots.len() != stored.len() {
            return Err(corrupt(
                &weights_path,
                format!("expected {} tensors, found {}", slots.len(), stored.len()),
            ));
        }
        for ((name, slot), (stored_name, tensor)) in slots.iter_mut().zip(stored) {
            if *name != stored_name {
                return Err(corrupt(&weights_path, format!("expected tensor `{name}`, found `{stored_name}`")));
            }
            if slot.dim() != tensor.dim() {
                return Err(corrupt(
                    &weights_path,
                    format!("tensor `{name}` has shape {:?}, expected {:?}", tensor.dim(), slot.dim()),
                ));
            }
            **slot = tensor;
        }
    }
    Ok(ModelState::from_parts(config, params, vocabs, snapshot.train, history, encoder))
}
