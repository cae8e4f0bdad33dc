//! The two auxiliary input channels: dependency-tag sequences and one-hot
//! (day, hour, device) metadata.

mod parser;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use chrono::{Datelike, Timelike};

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::textprep::CleanedText;

pub use parser::{ParserBackend, SpacyParser, StubParser, DEP_LABELS};

/// Word-level dependency relation labels of one text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTagSequence {
    pub tags: Vec<String>,
}

pub fn parse_dep_tags(text: &CleanedText, parser: &dyn ParserBackend) -> Result<DepTagSequence> {
    Ok(DepTagSequence {
        tags: parser.parse(text.as_str())?,
    })
}

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
const PAD_SYMBOL: &str = "<PAD>";
const UNK_SYMBOL: &str = "<UNK>";

/// Contiguous symbol ids; 0 is PAD, 1 is UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocab {
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
}

impl TagVocab {
    fn from_symbols(symbols: Vec<String>) -> TagVocab {
        let ids = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        TagVocab { symbols, ids }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, tag: &str) -> u32 {
        self.ids.get(tag).copied().unwrap_or(UNK_ID)
    }

    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.symbols.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TagVocab> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let symbols: Vec<String> = body.lines().map(str::to_string).collect();
        if symbols.len() < 2 || symbols[0] != PAD_SYMBOL || symbols[1] != UNK_SYMBOL {
            return Err(Error::CorruptCheckpoint {
                file: path.to_path_buf(),
                reason: "tag vocabulary must start with <PAD> and <UNK>".into(),
            });
        }
        let distinct: BTreeSet<&String> = symbols.iter().collect();
        if distinct.len() != symbols.len() {
            return Err(Error::CorruptCheckpoint {
                file: path.to_path_buf(),
                reason: "duplicate tag symbol".into(),
            });
        }
        Ok(TagVocab::from_symbols(symbols))
    }
}

/// PAD, UNK, then every observed tag in lexicographic order.
pub fn build_tag_vocab<'a, I>(parses: I) -> TagVocab
where
    I: IntoIterator<Item = &'a DepTagSequence>,
{
    let distinct: BTreeSet<&str> = parses
        .into_iter()
        .flat_map(|p| p.tags.iter().map(String::as_str))
        .filter(|t| *t != PAD_SYMBOL && *t != UNK_SYMBOL)
        .collect();
    let symbols = [PAD_SYMBOL, UNK_SYMBOL]
        .into_iter()
        .chain(distinct)
        .map(str::to_string)
        .collect();
    TagVocab::from_symbols(symbols)
}

/// Tag ids in order, truncated or zero-padded to `dp_max_len`.
pub fn encode_tag_sequence(tags: &[String], vocab: &TagVocab, dp_max_len: usize) -> Result<Vec<u32>> {
    if dp_max_len == 0 {
        return Err(Error::InvalidArgument("dp_max_len must be at least 1".into()));
    }
    let mut ids: Vec<u32> = tags.iter().take(dp_max_len).map(|t| vocab.id(t)).collect();
    ids.resize(dp_max_len, PAD_ID);
    Ok(ids)
}

/// Inverse of [`encode_tag_sequence`] over the non-pad prefix.
pub fn decode_tag_sequence(ids: &[u32], vocab: &TagVocab) -> Vec<String> {
    ids.iter()
        .take_while(|&&id| id != PAD_ID)
        .map(|&id| vocab.symbol(id).unwrap_or(UNK_SYMBOL).to_string())
        .collect()
}

pub const DAYS: usize = 7;
pub const HOURS: usize = 24;
pub const OTHER_DEVICE: &str = "<OTHER>";

/// Device names seen in training, with index 0 reserved for unseen devices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceVocab {
    devices: Vec<String>,
}

impl DeviceVocab {
    pub fn from_records<'a, I>(records: I) -> DeviceVocab
    where
        I: IntoIterator<Item = &'a TweetRecord>,
    {
        let distinct: BTreeSet<&str> = records
            .into_iter()
            .map(|r| r.device.as_str())
            .filter(|d| !d.is_empty() && *d != OTHER_DEVICE)
            .collect();
        Self::from_names(distinct)
    }

    pub fn from_names<'a, I: IntoIterator<Item = &'a str>>(names: I) -> DeviceVocab {
        let mut devices = vec![OTHER_DEVICE.to_string()];
        for name in names {
            if !devices.iter().any(|d| d == name) {
                devices.push(name.to_string());
            }
        }
        DeviceVocab { devices }
    }

    /// Number of device slots, the OTHER bucket included.
    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, device: &str) -> usize {
        self.devices.iter().position(|d| d == device).unwrap_or(0)
    }

    pub fn names(&self) -> &[String] {
        &self.devices
    }

    pub fn one_hot_dim(&self) -> usize {
        DAYS + HOURS + self.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.devices.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<DeviceVocab> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let devices: Vec<String> = body.lines().map(str::to_string).collect();
        if devices.first().map(String::as_str) != Some(OTHER_DEVICE) {
            return Err(Error::CorruptCheckpoint {
                file: path.to_path_buf(),
                reason: format!("device vocabulary must start with {OTHER_DEVICE}"),
            });
        }
        Ok(DeviceVocab { devices })
    }
}

/// Raw categorical metadata of a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawMetadata {
    /// 0 = Monday .. 6 = Sunday
    pub day_of_week: u8,
    /// 0..=23, UTC
    pub hour_of_day: u8,
    pub device: String,
}

pub fn extract_metadata(record: &TweetRecord) -> Result<RawMetadata> {
    let ts = record
        .created_at
        .ok_or_else(|| Error::Timestamp(format!("record `{}` has no created_at", record.id)))?;
    Ok(RawMetadata {
        day_of_week: ts.weekday().num_days_from_monday() as u8,
        hour_of_day: ts.hour() as u8,
        device: record.device.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataFeatures {
    pub day_of_week: u8,
    pub hour_of_day: u8,
    pub device_index: usize,
    /// Layout `[days(7) | hours(24) | devices]`.
    pub one_hot: Vec<u8>,
}

pub fn one_hot_metadata(meta: &RawMetadata, devices: &DeviceVocab) -> MetadataFeatures {
    let device_index = devices.index(&meta.device);
    let mut one_hot = vec![0u8; devices.one_hot_dim()];
    one_hot[usize::from(meta.day_of_week)] = 1;
    one_hot[DAYS + usize::from(meta.hour_of_day)] = 1;
    one_hot[DAYS + HOURS + device_index] = 1;
    MetadataFeatures {
        day_of_week: meta.day_of_week,
        hour_of_day: meta.hour_of_day,
        device_index,
        one_hot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, InfoType};
    use proptest::prelude::*;

    fn seq(tags: &[&str]) -> DepTagSequence {
        DepTagSequence {
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn record_at(ts: &str, device: &str) -> TweetRecord {
        TweetRecord {
            id: "r".into(),
            text: "x".into(),
            created_at: Some(parse_timestamp(ts).unwrap()),
            device: device.into(),
            info_type: InfoType::Health,
            votes: vec![],
            disclosure: None,
            augmented_from: None,
        }
    }

    #[test]
    fn full_label_set_gives_47() {
        let parses: Vec<DepTagSequence> = DEP_LABELS.chunks(7).map(seq).collect();
        assert_eq!(build_tag_vocab(&parses).len(), 47);
    }

    #[test]
    fn single_root_vocab() {
        let vocab = build_tag_vocab(&[seq(&["ROOT"])]);
        assert_eq!(vocab.symbols(), ["<PAD>", "<UNK>", "ROOT"]);
    }

    #[test]
    fn vocab_is_deterministic_and_sorted() {
        let parses = vec![seq(&["nsubj", "ROOT", "det"]), seq(&["amod", "ROOT"])];
        let a = build_tag_vocab(&parses);
        let b = build_tag_vocab(parses.iter().rev());
        assert_eq!(a, b);
        assert_eq!(a.symbols()[2..], ["ROOT", "amod", "det", "nsubj"]);
    }

    #[test]
    fn encode_pads_and_marks_unknown() {
        let vocab = build_tag_vocab(&[seq(&["ROOT", "det", "nsubj"])]);
        let tags: Vec<String> = ["nsubj", "ROOT", "det"].iter().map(|s| s.to_string()).collect();
        let ids = encode_tag_sequence(&tags, &vocab, 5).unwrap();
        assert_eq!(ids, vec![vocab.id("nsubj"), vocab.id("ROOT"), vocab.id("det"), 0, 0]);
        let unseen = encode_tag_sequence(&["xcomp".to_string()], &vocab, 3).unwrap();
        assert_eq!(unseen, vec![UNK_ID, 0, 0]);
    }

    #[test]
    fn encode_truncates() {
        let vocab = build_tag_vocab(&[seq(&["ROOT"])]);
        let tags = vec!["ROOT".to_string(); 60];
        assert_eq!(encode_tag_sequence(&tags, &vocab, 55).unwrap().len(), 55);
        assert!(encode_tag_sequence(&tags, &vocab, 0).is_err());
    }

    #[test]
    fn monday_midnight() {
        let meta = extract_metadata(&record_at("2021-05-03T00:15:00Z", "phone-app")).unwrap();
        assert_eq!((meta.day_of_week, meta.hour_of_day), (0, 0));
        assert_eq!(meta.device, "phone-app");
    }

    #[test]
    fn sunday_late() {
        let meta = extract_metadata(&record_at("2021-05-09T23:59:59Z", "x")).unwrap();
        assert_eq!((meta.day_of_week, meta.hour_of_day), (6, 23));
    }

    #[test]
    fn offsets_are_converted_to_utc() {
        let meta = extract_metadata(&record_at("2021-05-03T01:30:00+02:00", "x")).unwrap();
        assert_eq!((meta.day_of_week, meta.hour_of_day), (6, 23));
    }

    #[test]
    fn missing_timestamp_is_error() {
        let mut r = record_at("2021-05-03T00:15:00Z", "x");
        r.created_at = None;
        assert!(matches!(extract_metadata(&r), Err(Error::Timestamp(_))));
    }

    #[test]
    fn one_hot_layout_two_devices() {
        let devices = DeviceVocab::from_names(["phone-app"]);
        assert_eq!(devices.len(), 2);
        let meta = RawMetadata {
            day_of_week: 0,
            hour_of_day: 0,
            device: "never-seen".into(),
        };
        let f = one_hot_metadata(&meta, &devices);
        assert_eq!(f.one_hot.len(), 33);
        let ones: Vec<usize> = f.one_hot.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| i).collect();
        assert_eq!(ones, vec![0, 7, 31]);
    }

    #[test]
    fn one_hundred_eighteen_devices_gives_149() {
        let names: Vec<String> = (0..117).map(|i| format!("client-{i}")).collect();
        let devices = DeviceVocab::from_names(names.iter().map(String::as_str));
        assert_eq!(devices.len(), 118);
        assert_eq!(devices.one_hot_dim(), 149);
    }

    #[test]
    fn vocab_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tags = build_tag_vocab(&[seq(&["ROOT", "det"])]);
        tags.save(&dir.path().join("t.txt")).unwrap();
        assert_eq!(TagVocab::load(&dir.path().join("t.txt")).unwrap(), tags);
        let devices = DeviceVocab::from_names(["a", "b"]);
        devices.save(&dir.path().join("d.txt")).unwrap();
        assert_eq!(DeviceVocab::load(&dir.path().join("d.txt")).unwrap(), devices);
        std::fs::write(dir.path().join("bad.txt"), "ROOT\n").unwrap();
        assert!(TagVocab::load(&dir.path().join("bad.txt")).is_err());
    }

    proptest! {
        #[test]
        fn vocab_size_is_two_plus_distinct(tags in proptest::collection::vec(0usize..45, 1..80)) {
            let parse = DepTagSequence { tags: tags.iter().map(|&i| DEP_LABELS[i].to_string()).collect() };
            let distinct: BTreeSet<usize> = tags.iter().copied().collect();
            prop_assert_eq!(build_tag_vocab(&[parse]).len(), 2 + distinct.len());
        }

        #[test]
        fn encode_decode_round_trip(
            known in proptest::collection::vec(0usize..20, 1..10),
            probe in proptest::collection::vec(0usize..45, 0..70),
            dp_max_len in 1usize..60,
        ) {
            let vocab = build_tag_vocab(&[DepTagSequence { tags: known.iter().map(|&i| DEP_LABELS[i].to_string()).collect() }]);
            let tags: Vec<String> = probe.iter().map(|&i| DEP_LABELS[i].to_string()).collect();
            let ids = encode_tag_sequence(&tags, &vocab, dp_max_len).unwrap();
            prop_assert_eq!(ids.len(), dp_max_len);
            prop_assert!(ids.iter().all(|&id| (id as usize) < vocab.len()));
            let expected: Vec<String> = tags.iter().take(dp_max_len)
                .map(|t| if vocab.symbols().contains(t) { t.clone() } else { "<UNK>".to_string() })
                .collect();
            prop_assert_eq!(decode_tag_sequence(&ids, &vocab), expected);
        }

        #[test]
        fn one_hot_has_three_ones(day in 0u8..7, hour in 0u8..24, n_dev in 0usize..20, pick in 0usize..25) {
            let names: Vec<String> = (0..n_dev).map(|i| format!("d{i}")).collect();
            let devices = DeviceVocab::from_names(names.iter().map(String::as_str));
            let device = format!("d{pick}");
            let f = one_hot_metadata(&RawMetadata { day_of_week: day, hour_of_day: hour, device }, &devices);
            prop_assert_eq!(f.one_hot.iter().filter(|&&v| v == 1).count(), 3);
            prop_assert_eq!(f.one_hot[usize::from(day)], 1);
            prop_assert_eq!(f.one_hot[7 + usize::from(hour)], 1);
            prop_assert_eq!(f.one_hot[31 + f.device_index], 1);
        }
    }
}
