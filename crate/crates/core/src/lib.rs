//! Privacy disclosure detection for short social-media texts.
//!
//! The crate covers the full pipeline: corpus ingestion and balancing,
//! text cleaning, dependency-tag and metadata features, a multi-input
//! multi-output network on top of a frozen sentence encoder, and the
//! evaluation suite (reports, confusion matrices, ROC curves, baselines
//! and ablations).
//!
//! Every external resource (encoder, tokenizer, dependency parser,
//! synonym lexicon) sits behind a trait with a deterministic offline
//! implementation, so the whole pipeline runs without network access.

pub mod augment;
pub mod corpus;
pub mod error;
pub mod evalmetrics;
pub mod lingfeat;
pub mod nnmodel;
pub mod textprep;
pub(crate) mod util;

#[cfg(feature = "pretrained")]
pub mod pretrained;

pub use error::{Error, Result};
