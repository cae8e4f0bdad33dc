//! Labeled tweet records, corpus files, annotation aggregation, stratified
//! splitting and a deterministic synthetic corpus generator.

mod split;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{stratified_split, SplitSet};
pub use synth::{synth_corpus, synth_corpus_counts, synth_corpus_with, DEVICES as SYNTH_DEVICES};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoType {
    Health,
    Finance,
    Relationship,
}

impl InfoType {
    pub const ALL: [InfoType; 3] = [InfoType::Health, InfoType::Finance, InfoType::Relationship];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<InfoType> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InfoType::Health => "health",
            InfoType::Finance => "finance",
            InfoType::Relationship => "relationship",
        }
    }
}

impl fmt::Display for InfoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InfoType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "health" => Ok(InfoType::Health),
            "finance" => Ok(InfoType::Finance),
            "relationship" => Ok(InfoType::Relationship),
            other => Err(Error::InvalidArgument(format!(
                "`{other}` is not an info_type (expected one of health|finance|relationship)"
            ))),
        }
    }
}

/// A stratification cell: one information type crossed with one disclosure
/// label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub info_type: InfoType,
    pub disclosure: bool,
}

impl Cell {
    pub fn all() -> impl Iterator<Item = Cell> {
        InfoType::ALL.into_iter().flat_map(|info_type| {
            [true, false].into_iter().map(move |disclosure| Cell {
                info_type,
                disclosure,
            })
        })
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = if self.disclosure {
            "disclosure"
        } else {
            "non-disclosure"
        };
        write!(f, "{}/{}", self.info_type, label)
    }
}

/// One labeled text sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(
        with = "timestamp_serde",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub device: String,
    pub info_type: InfoType,
    #[serde(with = "votes_serde", default, skip_serializing_if = "Vec::is_empty")]
    pub votes: Vec<bool>,
    #[serde(with = "label_serde", default, skip_serializing_if = "Option::is_none")]
    pub disclosure: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmented_from: Option<String>,
}

impl TweetRecord {
    pub fn cell(&self) -> Option<Cell> {
        self.disclosure.map(|disclosure| Cell {
            info_type: self.info_type,
            disclosure,
        })
    }

    /// Checks the per-record invariants (everything except cross-record
    /// references).
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        if self.id.trim().is_empty() {
            return Err(("id".into(), "must be non-empty".into()));
        }
        if self.text.trim().is_empty() {
            return Err(("text".into(), "must be non-empty after trimming".into()));
        }
        if !self.votes.is_empty() {
            if self.votes.len() != 3 {
                return Err((
                    "votes".into(),
                    format!("expected 0 or 3 votes, found {}", self.votes.len()),
                ));
            }
            let majority = aggregate_votes(&self.votes).map_err(|e| ("votes".into(), e.to_string()))?;
            if self.disclosure != Some(majority) {
                return Err((
                    "disclosure".into(),
                    "must equal the majority of votes".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn parse_timestamp(value: &str) -> Result<DateTime<Utc>> {
    let value = value.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(value) {
        return Ok(ts.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(value, "%Y-%m-%d %H:%M:%S"))
        .map(|naive| naive.and_utc())
        .map_err(|_| Error::Timestamp(value.to_string()))
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

mod timestamp_serde {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match ts {
            Some(ts) => s.serialize_str(&super::format_timestamp(ts)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| super::parse_timestamp(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

fn bit_to_bool<E: serde::de::Error>(v: i64) -> std::result::Result<bool, E> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(E::custom(format!("expected 0 or 1, found {other}"))),
    }
}

mod label_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_u8(u8::from(*b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
        Option::<i64>::deserialize(d)?
            .map(super::bit_to_bool)
            .transpose()
    }
}

mod votes_serde {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for b in v {
            seq.serialize_element(&u8::from(*b))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        Option::<Vec<i64>>::deserialize(d)?
            .unwrap_or_default()
            .into_iter()
            .map(super::bit_to_bool)
            .collect()
    }
}

/// Majority label of an odd-length vote list.
pub fn aggregate_votes(votes: &[bool]) -> Result<bool> {
    if votes.is_empty() || votes.len() % 2 == 0 {
        return Err(Error::InvalidVotes(votes.len()));
    }
    let ones = votes.iter().filter(|&&v| v).count();
    Ok(ones * 2 > votes.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<TweetRecord>,
    pub provenance: String,
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness and `augmented_from`
    /// references.
    pub fn new(records: Vec<TweetRecord>, provenance: impl Into<String>) -> Result<Corpus> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateId(record.id.clone()));
            }
        }
        for (row, record) in records.iter().enumerate() {
            if let Some(src) = &record.augmented_from {
                if !seen.contains(src.as_str()) {
                    return Err(Error::MalformedRow {
                        row: row + 1,
                        field: "augmented_from".into(),
                        reason: format!("refers to unknown id `{src}`"),
                    });
                }
            }
        }
        Ok(Corpus {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn empty(provenance: impl Into<String>) -> Corpus {
        Corpus {
            records: Vec::new(),
            provenance: provenance.into(),
        }
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    /// Record counts per labeled cell. Unlabeled records are not counted.
    pub fn cell_counts(&self) -> BTreeMap<Cell, usize> {
        let mut counts = BTreeMap::new();
        for cell in self.records.iter().filter_map(TweetRecord::cell) {
            *counts.entry(cell).or_insert(0) += 1;
        }
        counts
    }

    /// Writes one JSON object per line.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_jsonl(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut *out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown corpus format `{other}`"))),
        }
    }
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Header of the accepted csv layout. `votes` holds `;`-separated bits.
pub const CSV_HEADER: [&str; 8] = [
    "id",
    "text",
    "created_at",
    "device",
    "info_type",
    "votes",
    "disclosure",
    "augmented_from",
];

/// Loosely typed row, before validation.
#[derive(Debug, Default, Deserialize)]
struct RawRow {
    id: Option<String>,
    text: Option<String>,
    created_at: Option<String>,
    device: Option<String>,
    info_type: Option<String>,
    #[serde(default)]
    votes: Option<Vec<i64>>,
    disclosure: Option<i64>,
    augmented_from: Option<String>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: Option<String>,
    text: Option<String>,
    created_at: Option<String>,
    device: Option<String>,
    info_type: Option<String>,
    votes: Option<String>,
    disclosure: Option<String>,
    augmented_from: Option<String>,
}

fn malformed(row: usize, field: &str, reason: impl Into<String>) -> Error {
    Error::MalformedRow {
        row,
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn non_empty(value: Option<String>) -> Option<String> {
    value.filter(|v| !v.trim().is_empty())
}

impl RawRow {
    fn from_csv(row: usize, csv: CsvRow) -> Result<RawRow> {
        let votes = match non_empty(csv.votes) {
            Some(v) => Some(
                v.split(|c| c == ';' || c == ',' || c == ' ')
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<i64>()
                            .map_err(|_| malformed(row, "votes", format!("`{t}` is not 0 or 1")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let disclosure = match non_empty(csv.disclosure) {
            Some(d) => Some(
                d.trim()
                    .parse::<i64>()
                    .map_err(|_| malformed(row, "disclosure", format!("`{d}` is not 0 or 1")))?,
            ),
            None => None,
        };
        Ok(RawRow {
            id: non_empty(csv.id),
            text: csv.text,
            created_at: non_empty(csv.created_at),
            device: csv.device,
            info_type: non_empty(csv.info_type),
            votes,
            disclosure,
            augmented_from: non_empty(csv.augmented_from),
        })
    }

    fn into_record(self, row: usize) -> Result<TweetRecord> {
        let text = self
            .text
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| malformed(row, "text", "missing or empty"))?;
        let info_type = self
            .info_type
            .ok_or_else(|| malformed(row, "info_type", "missing"))?;
        let info_type = info_type
            .parse::<InfoType>()
            .map_err(|e| malformed(row, "info_type", e.to_string()))?;
        let created_at = self
            .created_at
            .map(|ts| parse_timestamp(&ts).map_err(|e| malformed(row, "created_at", e.to_string())))
            .transpose()?;
        let bit = |field: &str, v: i64| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(malformed(row, field, format!("expected 0 or 1, found {other}"))),
        };
        let votes = self
            .votes
            .unwrap_or_default()
            .into_iter()
            .map(|v| bit("votes", v))
            .collect::<Result<Vec<_>>>()?;
        let mut disclosure = self.disclosure.map(|d| bit("disclosure", d)).transpose()?;
        if !votes.is_empty() && disclosure.is_none() && votes.len() == 3 {
            disclosure = Some(aggregate_votes(&votes)?);
        }
        let record = TweetRecord {
            id: self.id.unwrap_or_else(|| format!("row-{row}")),
            text,
            created_at,
            device: self.device.unwrap_or_default(),
            info_type,
            votes,
            disclosure,
            augmented_from: self.augmented_from,
        };
        record
            .validate()
            .map_err(|(field, reason)| malformed(row, &field, reason))?;
        Ok(record)
    }
}

/// Reads and validates a corpus file. Rows are numbered from 1; in jsonl
/// the number is the line number, in csv the data row after the header.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let records = match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), path)?,
        CorpusFormat::Csv => read_csv(file)?,
    };
    Corpus::new(records, path.display().to_string())
}

fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<Vec<TweetRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRow = serde_json::from_str(&line).map_err(|e| malformed(row, "<json>", e.to_string()))?;
        records.push(raw.into_record(row)?);
    }
    Ok(records)
}

fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<TweetRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["text", "info_type"] {
        if !headers.iter().any(|h| h == required) {
            return Err(malformed(0, required, "column missing from header"));
        }
    }
    if let Some(extra) = headers.iter().find(|h| !CSV_HEADER.contains(h)) {
        return Err(malformed(0, extra, "unknown column"));
    }
    let mut records = Vec::new();
    for (idx, result) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = idx + 1;
        let csv_row = result.map_err(|e| malformed(row, "<csv>", e.to_string()))?;
        records.push(RawRow::from_csv(row, csv_row)?.into_record(row)?);
    }
    Ok(records)
}
