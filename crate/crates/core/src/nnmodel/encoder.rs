use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textprep::EncoderInput;
use crate::util::derived_rng;

/// A frozen sentence encoder producing one pooled vector per input.
pub trait EncoderBackend: Send + Sync {
    fn name(&self) -> String;

    fn output_dim(&self) -> usize;

    fn encode(&self, input: &EncoderInput) -> Result<Vec<f64>>;

    fn encode_batch(&self, inputs: &[EncoderInput]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|i| self.encode(i)).collect()
    }

    /// Hex SHA-256 over every encoder parameter. Never changes for a frozen
    /// encoder.
    fn parameter_checksum(&self) -> String;
}

/// Offline encoder double: a seeded Gaussian projection of the token-id
/// counts under the attention mask, scaled by `1/sqrt(n)` and squashed with
/// `tanh`.
#[derive(Debug, Clone)]
pub struct StubEncoder {
    seed: u64,
    vocab_size: usize,
    output_dim: usize,
    projection: Vec<f32>,
}

impl StubEncoder {
    pub fn new(vocab_size: usize, output_dim: usize, seed: u64) -> Result<StubEncoder> {
        if vocab_size == 0 || output_dim == 0 {
            return Err(Error::InvalidArgument(
                "stub encoder needs a non-empty vocabulary and output".into(),
            ));
        }
        let mut rng = derived_rng(seed, "stub-encoder");
        let projection = (0..vocab_size * output_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(StubEncoder {
            seed,
            vocab_size,
            output_dim,
            projection,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn row(&self, id: u32) -> &[f32] {
        let start = id as usize * self.output_dim;
        &self.projection[start..start + self.output_dim]
    }
}

impl EncoderBackend for StubEncoder {
    fn name(&self) -> String {
        format!("stub-encoder/v{}/d{}/s{}", self.vocab_size, self.output_dim, self.seed)
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn encode(&self, input: &EncoderInput) -> Result<Vec<f64>> {
        let mut acc = vec![0.0f64; self.output_dim];
        let mut n = 0usize;
        for (&id, &mask) in input.token_ids.iter().zip(&input.attention_mask) {
            if mask == 0 {
                continue;
            }
            if id as usize >= self.vocab_size {
                return Err(Error::DimensionMismatch {
                    what: "token id".into(),
                    expected: self.vocab_size,
                    found: id as usize,
                });
            }
            for (a, &w) in acc.iter_mut().zip(self.row(id)) {
                *a += f64::from(w);
            }
            n += 1;
        }
        let scale = if n == 0 { 0.0 } else { 1.0 / (n as f64).sqrt() };
        Ok(acc.into_iter().map(|a| (a * scale).tanh()).collect())
    }

    fn parameter_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.projection {
            hasher.update(w.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}
