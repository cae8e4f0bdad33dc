//! Builds the encoder, tokenizer and parser selected by the run config.

use std::sync::Arc;

use pdisc_core::lingfeat::{ParserBackend, SpacyParser, StubParser};
use pdisc_core::nnmodel::{BackendInfo, EncoderBackend, Featurizer, ModelConfig, StubEncoder};
use pdisc_core::textprep::{HashTokenizer, NoiseList, TokenizerBackend};

use crate::config::{EncoderKind, ParserKind, RunConfig};
use crate::error::CliError;

/// Encoder plus tokenizer: both come from the same model family.
pub struct TextBackend {
    pub encoder: Arc<dyn EncoderBackend>,
    pub tokenizer: Arc<dyn TokenizerBackend>,
}

pub fn text_backend(cfg: &RunConfig, encoder_dim: usize) -> Result<TextBackend, CliError> {
    match cfg.encoder.unwrap_or_default() {
        EncoderKind::Stub => {
            let tokenizer = HashTokenizer::default();
            let encoder = StubEncoder::new(tokenizer.vocab_size(), encoder_dim, cfg.stub_encoder_seed.unwrap_or(0))?;
            Ok(TextBackend {
                encoder: Arc::new(encoder),
                tokenizer: Arc::new(tokenizer),
            })
        }
        EncoderKind::Pretrained => pretrained(cfg),
    }
}

#[cfg(feature = "pretrained")]
fn pretrained(cfg: &RunConfig) -> Result<TextBackend, CliError> {
    use pdisc_core::pretrained::{cached_model_dir, BertEncoder, WordPieceTokenizer, CACHE_ENV, DEFAULT_MODEL};

    let name = cfg.pretrained_model.as_deref().unwrap_or(DEFAULT_MODEL);
    let dir = cached_model_dir(name)
        .ok_or_else(|| CliError::Validation(format!("set {CACHE_ENV} to the directory holding {name}/")))?;
    if !dir.is_dir() {
        return Err(CliError::Validation(format!("pretrained model directory {} not found", dir.display())));
    }
    Ok(TextBackend {
        encoder: Arc::new(BertEncoder::load(&dir)?),
        tokenizer: Arc::new(WordPieceTokenizer::load(&dir)?),
    })
}

#[cfg(not(feature = "pretrained"))]
fn pretrained(_: &RunConfig) -> Result<TextBackend, CliError> {
    Err(CliError::Validation(
        "this build has no pretrained encoder support; rebuild with `--features pretrained`".into(),
    ))
}

pub fn parser(cfg: &RunConfig) -> Result<Arc<dyn ParserBackend>, CliError> {
    match cfg.parser.unwrap_or_default() {
        ParserKind::Stub => Ok(Arc::new(StubParser)),
        ParserKind::Real => {
            let defaults = SpacyParser::default();
            let parser = SpacyParser {
                python: cfg.spacy_python.clone().unwrap_or(defaults.python),
                model: cfg.spacy_model.clone().unwrap_or(defaults.model),
            };
            parser.probe()?;
            Ok(Arc::new(parser))
        }
    }
}

pub fn featurizer(cfg: &RunConfig, model: &ModelConfig, tokenizer: Arc<dyn TokenizerBackend>) -> Result<Featurizer, CliError> {
    let featurizer = Featurizer::new(tokenizer, parser(cfg)?, model.max_len, model.dp_max_len);
    Ok(match &cfg.noise_tokens {
        Some(path) => featurizer.with_noise(NoiseList::load(crate::config::existing(path, "noise list")?)?),
        None => featurizer,
    })
}

/// Rejects a featurizer whose tokenizer or parser differs from the ones a
/// checkpoint was trained with.
pub fn check_matches(info: &BackendInfo, featurizer: &Featurizer) -> Result<(), CliError> {
    let tokenizer = featurizer.tokenizer().name();
    let parser = featurizer.parser().name();
    if info.tokenizer != tokenizer || info.parser != parser {
        return Err(CliError::Validation(format!(
            "checkpoint was trained with tokenizer `{}` and parser `{}`, but this run uses `{tokenizer}` and `{parser}`",
            info.tokenizer, info.parser
        )));
    }
    Ok(())
}
