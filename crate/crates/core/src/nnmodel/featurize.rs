use std::path::Path;
use std::sync::Arc;

use super::config::ModelConfig;
use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::lingfeat::{
    build_tag_vocab, encode_tag_sequence, extract_metadata, one_hot_metadata, DepTagSequence, DeviceVocab,
    MetadataFeatures, ParserBackend, StubParser, TagVocab,
};
use crate::textprep::{clean_text_with, tokenize_encode, EncoderInput, HashTokenizer, NoiseList, TokenizerBackend};

pub const TAG_VOCAB_FILE: &str = "dp_tags.txt";
pub const DEVICE_VOCAB_FILE: &str = "devices.txt";

/// Vocabulary snapshots fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabs {
    pub tags: TagVocab,
    pub devices: DeviceVocab,
}

impl Vocabs {
    /// Copies the vocabulary-dependent widths into `cfg`.
    pub fn apply_to(&self, cfg: ModelConfig) -> ModelConfig {
        ModelConfig {
            dp_vocab_size: self.tags.len(),
            meta_in_dim: self.devices.one_hot_dim(),
            ..cfg
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.tags.save(&dir.join(TAG_VOCAB_FILE))?;
        self.devices.save(&dir.join(DEVICE_VOCAB_FILE))
    }

    pub fn load(dir: &Path) -> Result<Vocabs> {
        Ok(Vocabs {
            tags: TagVocab::load(&dir.join(TAG_VOCAB_FILE))?,
            devices: DeviceVocab::load(&dir.join(DEVICE_VOCAB_FILE))?,
        })
    }
}

/// Model inputs for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFeatures {
    pub id: String,
    pub input: EncoderInput,
    pub dp_ids: Vec<u32>,
    pub meta: MetadataFeatures,
    pub info_type: usize,
    /// `None` for records without a disclosure label.
    pub disclosure: Option<bool>,
}

/// Row-aligned model inputs; labels are empty for unlabeled batches.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchFeatures {
    pub token_ids: Vec<Vec<u32>>,
    pub attention_mask: Vec<Vec<u8>>,
    pub dp_ids: Vec<Vec<u32>>,
    pub meta_one_hot: Vec<Vec<u8>>,
    pub y_type: Vec<Vec<u8>>,
    pub y_disc: Vec<u8>,
}

impl BatchFeatures {
    /// Stacks records; labels are kept only if every record has both.
    pub fn from_records(records: &[RecordFeatures], n_info_types: usize) -> BatchFeatures {
        let labeled = records.iter().all(|r| r.disclosure.is_some());
        let mut batch = BatchFeatures::default();
        for r in records {
            batch.token_ids.push(r.input.token_ids.clone());
            batch.attention_mask.push(r.input.attention_mask.clone());
            batch.dp_ids.push(r.dp_ids.clone());
            batch.meta_one_hot.push(r.meta.one_hot.clone());
            if labeled {
                let mut row = vec![0u8; n_info_types];
                row[r.info_type] = 1;
                batch.y_type.push(row);
                batch.y_disc.push(u8::from(r.disclosure == Some(true)));
            }
        }
        batch
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn encoder_inputs(&self) -> Vec<EncoderInput> {
        self.token_ids
            .iter()
            .zip(&self.attention_mask)
            .map(|(ids, mask)| EncoderInput {
                token_ids: ids.clone(),
                attention_mask: mask.clone(),
            })
            .collect()
    }
}

/// Turns records into model inputs: cleaning, subword ids, dependency tags
/// and one-hot metadata.
#[derive(Clone)]
pub struct Featurizer {
    tokenizer: Arc<dyn TokenizerBackend>,
    parser: Arc<dyn ParserBackend>,
    noise: NoiseList,
    max_len: usize,
    dp_max_len: usize,
}

impl std::fmt::Debug for Featurizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Featurizer")
            .field("tokenizer", &self.tokenizer.name())
            .field("parser", &self.parser.name())
            .field("max_len", &self.max_len)
            .field("dp_max_len", &self.dp_max_len)
            .finish()
    }
}

impl Featurizer {
    pub fn new(
        tokenizer: Arc<dyn TokenizerBackend>,
        parser: Arc<dyn ParserBackend>,
        max_len: usize,
        dp_max_len: usize,
    ) -> Featurizer {
        Featurizer {
            tokenizer,
            parser,
            noise: NoiseList::default(),
            max_len,
            dp_max_len,
        }
    }

    /// Hash tokenizer and stub parser sized for `cfg`.
    pub fn stub(cfg: &ModelConfig) -> Featurizer {
        Featurizer::new(Arc::new(HashTokenizer::default()), Arc::new(StubParser), cfg.max_len, cfg.dp_max_len)
    }

    pub fn with_noise(mut self, noise: NoiseList) -> Featurizer {
        self.noise = noise;
        self
    }

    pub fn tokenizer(&self) -> &Arc<dyn TokenizerBackend> {
        &self.tokenizer
    }

    pub fn parser(&self) -> &Arc<dyn ParserBackend> {
        &self.parser
    }

    fn parse_all(&self, records: &[TweetRecord]) -> Result<Vec<(crate::textprep::CleanedText, DepTagSequence)>> {
        let cleaned = records
            .iter()
            .map(|r| clean_text_with(&r.text, &self.noise))
            .collect::<Result<Vec<_>>>()?;
        let texts: Vec<&str> = cleaned.iter().map(|c| c.as_str()).collect();
        let parses = self.parser.parse_batch(&texts)?;
        if parses.len() != cleaned.len() {
            return Err(Error::ParserUnavailable(format!(
                "parser returned {} parses for {} texts",
                parses.len(),
                cleaned.len()
            )));
        }
        Ok(cleaned
            .into_iter()
            .zip(parses)
            .map(|(c, tags)| (c, DepTagSequence { tags }))
            .collect())
    }

    /// Tag and device vocabularies observed in `records`.
    pub fn fit_vocabs(&self, records: &[TweetRecord]) -> Result<Vocabs> {
        let parses: Vec<DepTagSequence> = self.parse_all(records)?.into_iter().map(|(_, p)| p).collect();
        Ok(Vocabs {
            tags: build_tag_vocab(&parses),
            devices: DeviceVocab::from_records(records),
        })
    }

    pub fn featurize(&self, record: &TweetRecord, vocabs: &Vocabs) -> Result<RecordFeatures> {
        let mut out = self.featurize_all(std::slice::from_ref(record), vocabs)?;
        Ok(out.remove(0))
    }

    pub fn featurize_all(&self, records: &[TweetRecord], vocabs: &Vocabs) -> Result<Vec<RecordFeatures>> {
        let parsed = self.parse_all(records)?;
        records
            .iter()
            .zip(parsed)
            .map(|(record, (cleaned, parse))| {
                let input = tokenize_encode(cleaned.as_str(), self.tokenizer.as_ref(), self.max_len)?;
                let dp_ids = encode_tag_sequence(&parse.tags, &vocabs.tags, self.dp_max_len)?;
                let meta = one_hot_metadata(&extract_metadata(record)?, &vocabs.devices);
                Ok(RecordFeatures {
                    id: record.id.clone(),
                    input,
                    dp_ids,
                    meta,
                    info_type: record.info_type.index(),
                    disclosure: record.disclosure,
                })
            })
            .collect()
    }

    pub fn batch(&self, records: &[TweetRecord], vocabs: &Vocabs, n_info_types: usize) -> Result<BatchFeatures> {
        Ok(BatchFeatures::from_records(&self.featurize_all(records, vocabs)?, n_info_types))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth_corpus;

    #[test]
    fn batch_rows_align() {
        let corpus = synth_corpus(4, 3).unwrap();
        let cfg = ModelConfig::default();
        let f = Featurizer::stub(&cfg);
        let vocabs = f.fit_vocabs(corpus.records()).unwrap();
        let batch = f.batch(corpus.records(), &vocabs, 3).unwrap();
        assert_eq!(batch.len(), 24);
        assert!(batch.token_ids.iter().all(|r| r.len() == 55));
        assert!(batch.dp_ids.iter().all(|r| r.len() == 55));
        assert!(batch.meta_one_hot.iter().all(|r| r.len() == vocabs.devices.one_hot_dim()));
        assert!(batch.y_type.iter().all(|r| r.iter().map(|&v| usize::from(v)).sum::<usize>() == 1));
        assert_eq!(batch.y_disc.len(), 24);
    }

    #[test]
    fn unlabeled_records_give_empty_targets() {
        let corpus = synth_corpus(1, 3).unwrap();
        let mut records = corpus.into_records();
        records[0].disclosure = None;
        records[0].votes.clear();
        let cfg = ModelConfig::default();
        let f = Featurizer::stub(&cfg);
        let vocabs = f.fit_vocabs(&records).unwrap();
        let batch = f.batch(&records, &vocabs, 3).unwrap();
        assert!(batch.y_type.is_empty() && batch.y_disc.is_empty());
    }

    #[test]
    fn vocabs_round_trip() {
        let corpus = synth_corpus(2, 5).unwrap();
        let f = Featurizer::stub(&ModelConfig::default());
        let vocabs = f.fit_vocabs(corpus.records()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        vocabs.save(dir.path()).unwrap();
        assert_eq!(Vocabs::load(dir.path()).unwrap(), vocabs);
    }
}
