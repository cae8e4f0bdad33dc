use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which input branches feed the heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    NoMetadata,
    NoDp,
    EncoderOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoMetadata, Variant::NoDp, Variant::EncoderOnly];

    pub fn uses_dp(self) -> bool {
        matches!(self, Variant::Full | Variant::NoMetadata)
    }

    pub fn uses_metadata(self) -> bool {
        matches!(self, Variant::Full | Variant::NoDp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoMetadata => "no_metadata",
            Variant::NoDp => "no_dp",
            Variant::EncoderOnly => "encoder_only",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown variant `{s}` (expected full|no_metadata|no_dp|encoder_only)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub max_len: usize,
    pub dp_max_len: usize,
    pub dp_vocab_size: usize,
    pub dp_embed_dim: usize,
    pub recurrent_units: usize,
    pub encoder_out_dim: usize,
    pub dropout_rate: f64,
    pub meta_in_dim: usize,
    pub meta_dense_units: usize,
    pub n_info_types: usize,
    pub head_init_std: f64,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_len: 55,
            dp_max_len: 55,
            dp_vocab_size: 47,
            dp_embed_dim: 16,
            recurrent_units: 32,
            encoder_out_dim: 768,
            dropout_rate: 0.1,
            meta_in_dim: 149,
            meta_dense_units: 32,
            n_info_types: 3,
            head_init_std: 0.02,
            variant: Variant::Full,
        }
    }
}

impl ModelConfig {
    /// Width after joining the encoder output with the recurrent branch.
    pub fn concat1_dim(&self) -> usize {
        self.encoder_out_dim + if self.variant.uses_dp() { self.recurrent_units } else { 0 }
    }

    /// Width seen by both heads.
    pub fn concat2_dim(&self) -> usize {
        self.concat1_dim() + if self.variant.uses_metadata() { self.meta_dense_units } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("max_len", self.max_len),
            ("dp_max_len", self.dp_max_len),
            ("dp_embed_dim", self.dp_embed_dim),
            ("recurrent_units", self.recurrent_units),
            ("encoder_out_dim", self.encoder_out_dim),
            ("meta_in_dim", self.meta_in_dim),
            ("meta_dense_units", self.meta_dense_units),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if self.max_len < 3 {
            return Err(Error::InvalidArgument("max_len must be at least 3".into()));
        }
        if self.dp_vocab_size < 2 {
            return Err(Error::InvalidArgument("dp_vocab_size must cover PAD and UNK".into()));
        }
        if self.n_info_types < 2 {
            return Err(Error::InvalidArgument("n_info_types must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument("dropout_rate must lie in [0, 1)".into()));
        }
        if !(self.head_init_std > 0.0) {
            return Err(Error::InvalidArgument("head_init_std must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    pub gradient_clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Share of every (info_type, disclosure) cell held out for testing.
    pub test_fraction: f64,
    /// Share of the remaining training data held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            adam_epsilon: 1e-8,
            gradient_clip_norm: 1.0,
            batch_size: 64,
            epochs: 5,
            seed: 0,
            test_fraction: 0.10,
            validation_fraction: 0.20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_epsilon", self.adam_epsilon),
            ("gradient_clip_norm", self.gradient_clip_norm),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("batch_size and epochs must be at least 1".into()));
        }
        for (name, f) in [("test_fraction", self.test_fraction), ("validation_fraction", self.validation_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}
