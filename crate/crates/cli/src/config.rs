//! Run configuration: a flat TOML file whose values command-line flags
//! override.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use pdisc_core::nnmodel::{ModelConfig, TrainConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Pretrained,
    #[default]
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ParserKind {
    Real,
    #[default]
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LexiconKind {
    Real,
    #[default]
    Fixture,
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::Pretrained => "pretrained",
            EncoderKind::Stub => "stub",
        })
    }
}

/// Every key a config file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // model
    pub max_len: Option<usize>,
    pub dp_max_len: Option<usize>,
    pub dp_embed_dim: Option<usize>,
    pub recurrent_units: Option<usize>,
    pub encoder_out_dim: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub meta_dense_units: Option<usize>,
    pub head_init_std: Option<f64>,
    pub variant: Option<Variant>,
    // training
    pub learning_rate: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub gradient_clip_norm: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub test_fraction: Option<f64>,
    pub validation_fraction: Option<f64>,
    // backends
    pub encoder: Option<EncoderKind>,
    pub parser: Option<ParserKind>,
    pub lexicon: Option<LexiconKind>,
    pub stub_encoder_seed: Option<u64>,
    pub pretrained_model: Option<String>,
    pub spacy_python: Option<PathBuf>,
    pub spacy_model: Option<String>,
    pub wordnet_dir: Option<PathBuf>,
    pub wordnet_domains: Option<PathBuf>,
    pub lexicon_file: Option<PathBuf>,
    pub noise_tokens: Option<PathBuf>,
    // data and outputs
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    // command specific
    pub n_per_cell: Option<usize>,
    pub ambiguous_share: Option<f64>,
    pub per_cell: Option<usize>,
    pub variants: Option<Vec<Variant>>,
}

macro_rules! overlay {
    ($base:expr, $over:expr; $($field:ident),* $(,)?) => {
        $( if $over.$field.is_some() { $base.$field = $over.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// Values set in `other` win.
    pub fn merge(mut self, other: &RunConfig) -> RunConfig {
        overlay!(self, other;
            max_len, dp_max_len, dp_embed_dim, recurrent_units, encoder_out_dim, dropout_rate,
            meta_dense_units, head_init_std, variant, learning_rate, adam_epsilon, gradient_clip_norm,
            batch_size, epochs, seed, test_fraction, validation_fraction, encoder, parser, lexicon,
            stub_encoder_seed, pretrained_model, spacy_python, spacy_model, wordnet_dir, wordnet_domains,
            lexicon_file, noise_tokens, data, out, checkpoint, n_per_cell, ambiguous_share, per_cell, variants,
        );
        self
    }

    /// Model settings; vocabulary-dependent widths are filled in later.
    pub fn model_config(&self) -> ModelConfig {
        let d = ModelConfig::default();
        ModelConfig {
            max_len: self.max_len.unwrap_or(d.max_len),
            dp_max_len: self.dp_max_len.unwrap_or(d.dp_max_len),
            dp_embed_dim: self.dp_embed_dim.unwrap_or(d.dp_embed_dim),
            recurrent_units: self.recurrent_units.unwrap_or(d.recurrent_units),
            encoder_out_dim: self.encoder_out_dim.unwrap_or(d.encoder_out_dim),
            dropout_rate: self.dropout_rate.unwrap_or(d.dropout_rate),
            meta_dense_units: self.meta_dense_units.unwrap_or(d.meta_dense_units),
            head_init_std: self.head_init_std.unwrap_or(d.head_init_std),
            variant: self.variant.unwrap_or(d.variant),
            ..d
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            adam_epsilon: self.adam_epsilon.unwrap_or(d.adam_epsilon),
            gradient_clip_norm: self.gradient_clip_norm.unwrap_or(d.gradient_clip_norm),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            epochs: self.epochs.unwrap_or(d.epochs),
            seed: self.seed.unwrap_or(d.seed),
            test_fraction: self.test_fraction.unwrap_or(d.test_fraction),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn require_data(&self) -> Result<&Path, CliError> {
        let path = self
            .data
            .as_deref()
            .ok_or_else(|| CliError::Validation("--data is required".into()))?;
        existing(path, "data file")
    }

    pub fn require_out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Validation("--out is required".into()))
    }

    pub fn require_checkpoint(&self) -> Result<&Path, CliError> {
        let path = self
            .checkpoint
            .as_deref()
            .ok_or_else(|| CliError::Validation("--checkpoint is required".into()))?;
        if !path.is_dir() {
            return Err(CliError::Validation(format!("checkpoint directory {} not found", path.display())));
        }
        Ok(path)
    }
}

pub fn existing<'a>(path: &'a Path, what: &str) -> Result<&'a Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Validation(format!("{what} {} not found", path.display())))
    }
}

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_str(s.trim()).map_err(|e| e.to_string())
}
