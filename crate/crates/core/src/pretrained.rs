//! Pretrained BERT encoder and WordPiece tokenizer loaded from a local
//! model directory (`config.json`, `model.safetensors`, and `tokenizer.json`
//! or `vocab.txt`). Nothing is downloaded here: populate the directory
//! beforehand, e.g. under `$PDISC_CACHE/bert-base-uncased`.

use std::fs;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Module, Tensor};
use candle_nn::{Linear, VarBuilder};
use candle_transformers::models::bert::{BertModel, Config};
use sha2::{Digest, Sha256};
use tokenizers::Tokenizer;

use crate::error::{Error, Result};
use crate::nnmodel::EncoderBackend;
use crate::textprep::{EncoderInput, TokenizerBackend};

pub const DEFAULT_MODEL: &str = "bert-base-uncased";
pub const CACHE_ENV: &str = "PDISC_CACHE";

/// `$PDISC_CACHE/<model>`, if the variable is set.
pub fn cached_model_dir(model: &str) -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(|root| PathBuf::from(root).join(model))
}

fn required(dir: &Path, name: &str, wrap: fn(String) -> Error) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(wrap(format!("{} not found", path.display())))
    }
}

pub struct WordPieceTokenizer {
    inner: Tokenizer,
    cls: u32,
    sep: u32,
    pad: u32,
}

impl WordPieceTokenizer {
    pub fn load(dir: &Path) -> Result<WordPieceTokenizer> {
        let json = dir.join("tokenizer.json");
        let inner = if json.is_file() {
            Tokenizer::from_file(&json).map_err(|e| Error::TokenizerUnavailable(e.to_string()))?
        } else {
            Self::from_vocab(&required(dir, "vocab.txt", Error::TokenizerUnavailable)?)?
        };
        let id = |token: &str| {
            inner
                .token_to_id(token)
                .ok_or_else(|| Error::TokenizerUnavailable(format!("vocabulary lacks {token}")))
        };
        Ok(WordPieceTokenizer {
            cls: id("[CLS]")?,
            sep: id("[SEP]")?,
            pad: id("[PAD]")?,
            inner,
        })
    }

    fn from_vocab(vocab: &Path) -> Result<Tokenizer> {
        use tokenizers::models::wordpiece::WordPiece;
        use tokenizers::normalizers::BertNormalizer;
        use tokenizers::pre_tokenizers::bert::BertPreTokenizer;

        let path = vocab.to_str().ok_or_else(|| Error::TokenizerUnavailable("non UTF-8 path".into()))?;
        let model = WordPiece::from_file(path)
            .unk_token("[UNK]".into())
            .build()
            .map_err(|e| Error::TokenizerUnavailable(e.to_string()))?;
        let mut tokenizer = Tokenizer::new(model);
        tokenizer
            .with_normalizer(Some(BertNormalizer::new(true, true, None, true)))
            .map_err(|e| Error::TokenizerUnavailable(e.to_string()))?;
        tokenizer.with_pre_tokenizer(Some(BertPreTokenizer));
        Ok(tokenizer)
    }
}

impl TokenizerBackend for WordPieceTokenizer {
    fn name(&self) -> String {
        format!("wordpiece/{}", self.vocab_size())
    }

    fn tokenize(&self, text: &str) -> Result<Vec<u32>> {
        let encoding = self
            .inner
            .encode(text, false)
            .map_err(|e| Error::TokenizerUnavailable(e.to_string()))?;
        Ok(encoding.get_ids().to_vec())
    }

    fn cls_id(&self) -> u32 {
        self.cls
    }

    fn sep_id(&self) -> u32 {
        self.sep
    }

    fn pad_id(&self) -> u32 {
        self.pad
    }

    fn vocab_size(&self) -> usize {
        self.inner.get_vocab_size(true)
    }
}

/// Frozen BERT with its pooler: `tanh(W h_[CLS] + b)`.
pub struct BertEncoder {
    model: BertModel,
    pooler: Linear,
    hidden: usize,
    checksum: String,
    device: Device,
}

fn candle_err(e: candle_core::Error) -> Error {
    Error::EncoderUnavailable(e.to_string())
}

impl BertEncoder {
    pub fn load(dir: &Path) -> Result<BertEncoder> {
        let config_path = required(dir, "config.json", Error::EncoderUnavailable)?;
        let weights = required(dir, "model.safetensors", Error::EncoderUnavailable)?;
        let config: Config = serde_json::from_str(
            &fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?,
        )?;
        let hidden = serde_json::from_str::<serde_json::Value>(
            &fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?,
        )?
        .get("hidden_size")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::EncoderUnavailable("config.json lacks hidden_size".into()))? as usize;

        let bytes = fs::read(&weights).map_err(|e| Error::io(&weights, e))?;
        let checksum = hex::encode(Sha256::digest(&bytes));

        let device = Device::Cpu;
        let vb = VarBuilder::from_buffered_safetensors(bytes, DType::F32, &device).map_err(candle_err)?;
        let model = BertModel::load(vb.clone(), &config).map_err(candle_err)?;
        let pooler = candle_nn::linear(hidden, hidden, vb.pp("bert.pooler.dense"))
            .or_else(|_| candle_nn::linear(hidden, hidden, vb.pp("pooler.dense")))
            .map_err(candle_err)?;
        Ok(BertEncoder {
            model,
            pooler,
            hidden,
            checksum,
            device,
        })
    }

    fn run(&self, inputs: &[EncoderInput]) -> candle_core::Result<Vec<Vec<f64>>> {
        let rows = inputs.len();
        let len = inputs.first().map_or(0, EncoderInput::max_len);
        let ids: Vec<u32> = inputs.iter().flat_map(|i| i.token_ids.iter().copied()).collect();
        let mask: Vec<u32> = inputs
            .iter()
            .flat_map(|i| i.attention_mask.iter().map(|&m| u32::from(m)))
            .collect();
        let ids = Tensor::from_vec(ids, (rows, len), &self.device)?;
        let mask = Tensor::from_vec(mask, (rows, len), &self.device)?;
        let token_types = ids.zeros_like()?;
        let hidden = self.model.forward(&ids, &token_types, Some(&mask))?;
        let cls = hidden.narrow(1, 0, 1)?.squeeze(1)?;
        let pooled = self.pooler.forward(&cls)?.tanh()?;
        let pooled = pooled.to_dtype(DType::F64)?.to_vec2::<f64>()?;
        Ok(pooled)
    }
}

impl EncoderBackend for BertEncoder {
    fn name(&self) -> String {
        format!("bert/{}", self.hidden)
    }

    fn output_dim(&self) -> usize {
        self.hidden
    }

    fn encode(&self, input: &EncoderInput) -> Result<Vec<f64>> {
        let mut out = self.encode_batch(std::slice::from_ref(input))?;
        Ok(out.remove(0))
    }

    fn encode_batch(&self, inputs: &[EncoderInput]) -> Result<Vec<Vec<f64>>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let len = inputs[0].max_len();
        if inputs.iter().any(|i| i.max_len() != len) {
            return Err(Error::InvalidArgument("encoder inputs differ in length".into()));
        }
        // Bounded chunks keep peak memory modest on CPU.
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(32) {
            out.extend(self.run(chunk).map_err(candle_err)?);
        }
        Ok(out)
    }

    fn parameter_checksum(&self) -> String {
        self.checksum.clone()
    }
}
