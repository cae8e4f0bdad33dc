use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::fnv1a;

/// Subword tokenizer feeding the sentence encoder.
pub trait TokenizerBackend: Send + Sync {
    /// Short identifier recorded alongside checkpoints.
    fn name(&self) -> String;

    /// Subword ids without special tokens.
    fn tokenize(&self, text: &str) -> Result<Vec<u32>>;

    fn cls_id(&self) -> u32;
    fn sep_id(&self) -> u32;
    fn pad_id(&self) -> u32;
    fn vocab_size(&self) -> usize;
}

/// Offline tokenizer: lowercased words and single punctuation marks, each
/// hashed into a fixed number of buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashTokenizer {
    vocab_size: usize,
}

impl HashTokenizer {
    pub const PAD: u32 = 0;
    pub const CLS: u32 = 1;
    pub const SEP: u32 = 2;
    const RESERVED: u32 = 4;
    pub const DEFAULT_VOCAB: usize = 4096;

    pub fn new(vocab_size: usize) -> Result<Self> {
        if vocab_size <= Self::RESERVED as usize {
            return Err(Error::InvalidArgument(format!(
                "hash tokenizer vocabulary must exceed {} ids",
                Self::RESERVED
            )));
        }
        Ok(HashTokenizer { vocab_size })
    }

    /// Splits into lowercased words and single punctuation marks.
    pub fn pieces(text: &str) -> Vec<String> {
        let mut pieces = Vec::new();
        let mut word = String::new();
        for c in text.chars() {
            if c.is_alphanumeric() || c == '\'' {
                word.extend(c.to_lowercase());
            } else {
                if !word.is_empty() {
                    pieces.push(std::mem::take(&mut word));
                }
                if !c.is_whitespace() {
                    pieces.push(c.to_string());
                }
            }
        }
        if !word.is_empty() {
            pieces.push(word);
        }
        pieces
    }

    fn id_of(&self, piece: &str) -> u32 {
        let buckets = self.vocab_size as u64 - u64::from(Self::RESERVED);
        Self::RESERVED + (fnv1a(piece.as_bytes()) % buckets) as u32
    }
}

impl Default for HashTokenizer {
    fn default() -> Self {
        HashTokenizer {
            vocab_size: Self::DEFAULT_VOCAB,
        }
    }
}

impl TokenizerBackend for HashTokenizer {
    fn name(&self) -> String {
        format!("hash-tokenizer/{}", self.vocab_size)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<u32>> {
        Ok(Self::pieces(text).iter().map(|p| self.id_of(p)).collect())
    }

    fn cls_id(&self) -> u32 {
        Self::CLS
    }

    fn sep_id(&self) -> u32 {
        Self::SEP
    }

    fn pad_id(&self) -> u32 {
        Self::PAD
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

/// Fixed-length token ids and attention mask for the encoder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderInput {
    pub token_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
}

impl EncoderInput {
    pub fn max_len(&self) -> usize {
        self.token_ids.len()
    }

    /// Number of positions with mask 1.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    /// Checks the framing invariants against a tokenizer's special ids.
    pub fn check(&self, tokenizer: &dyn TokenizerBackend) -> std::result::Result<(), String> {
        let n = self.token_ids.len();
        if self.attention_mask.len() != n {
            return Err(format!("mask length {} != ids length {n}", self.attention_mask.len()));
        }
        let real = self.real_len();
        if self.attention_mask[..real].iter().any(|&m| m != 1) || self.attention_mask[real..].iter().any(|&m| m != 0) {
            return Err("mask is not a prefix of ones".into());
        }
        if real < 2 {
            return Err("fewer than two real positions".into());
        }
        if self.token_ids[0] != tokenizer.cls_id() {
            return Err("position 0 is not the start token".into());
        }
        if self.token_ids[real - 1] != tokenizer.sep_id() {
            return Err("last real position is not the separator".into());
        }
        if self.token_ids[real..].iter().any(|&t| t != tokenizer.pad_id()) {
            return Err("padding positions hold non-pad ids".into());
        }
        Ok(())
    }
}

/// Tokenizes, frames with start/separator tokens, truncates so the total
/// including both specials is at most `max_len`, and pads to `max_len`.
pub fn tokenize_encode(text: &str, tokenizer: &dyn TokenizerBackend, max_len: usize) -> Result<EncoderInput> {
    if max_len < 3 {
        return Err(Error::InvalidArgument(format!("max_len must be at least 3, got {max_len}")));
    }
    let mut pieces = tokenizer.tokenize(text)?;
    pieces.truncate(max_len - 2);
    let mut token_ids = Vec::with_capacity(max_len);
    token_ids.push(tokenizer.cls_id());
    token_ids.extend(pieces);
    token_ids.push(tokenizer.sep_id());
    let real = token_ids.len();
    token_ids.resize(max_len, tokenizer.pad_id());
    let mut attention_mask = vec![1u8; real];
    attention_mask.resize(max_len, 0);
    Ok(EncoderInput {
        token_ids,
        attention_mask,
    })
}
