//! Synonym-replacement augmentation and per-cell corpus balancing.

mod lexicon;

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use regex::Regex;

use crate::corpus::{Cell, Corpus, InfoType, TweetRecord};
use crate::error::{Error, Result};
use crate::util::derived_rng;

pub use lexicon::{wordnet_domains, FixtureLexicon, Lexicon, WordNetLexicon, DEFAULT_LEXICON};

/// Probability that a word with candidates is replaced.
pub const REPLACE_PROBABILITY: f64 = 0.5;

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "again", "all", "am", "an", "and", "any", "are", "as", "at", "be", "because", "been",
    "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "on", "or", "our",
    "she", "so", "than", "that", "the", "their", "them", "then", "there", "they", "this", "to", "too", "us",
    "was", "we", "were", "what", "when", "which", "who", "why", "will", "with", "would", "you", "your",
];

fn word_pattern() -> &'static Regex {
    static WORD: OnceLock<Regex> = OnceLock::new();
    WORD.get_or_init(|| Regex::new(r"[A-Za-z][A-Za-z'-]*").unwrap())
}

/// Synonyms of `word` in `domain`, never containing the word itself.
pub fn synonym_candidates(word: &str, domain: InfoType, lexicon: &dyn Lexicon) -> Result<Vec<String>> {
    let lowered = word.to_lowercase();
    Ok(lexicon
        .lookup(word, domain)?
        .into_iter()
        .filter(|s| s.to_lowercase() != lowered)
        .collect())
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Replaces content words of a labeled record with domain synonyms.
///
/// Each word with at least one candidate is replaced with probability
/// [`REPLACE_PROBABILITY`]; if the draw selects none, one candidate word is
/// replaced anyway. The result keeps both labels, gets the id
/// `<id>~aug-<seed>` and points back at its source.
pub fn augment_record(record: &TweetRecord, lexicon: &dyn Lexicon, seed: u64) -> Result<TweetRecord> {
    if record.disclosure.is_none() {
        return Err(Error::Unlabeled(record.id.clone()));
    }
    let mut rng = derived_rng(seed, &format!("augment/{}", record.id));
    let mut slots = Vec::new();
    for m in word_pattern().find_iter(&record.text) {
        let word = m.as_str();
        if word.len() < 3 || STOPWORDS.contains(&word.to_lowercase().as_str()) {
            continue;
        }
        let candidates = synonym_candidates(word, record.info_type, lexicon)?;
        if !candidates.is_empty() {
            slots.push((m.range(), candidates));
        }
    }
    if slots.is_empty() {
        return Err(Error::NoReplaceableWord(record.id.clone()));
    }

    let mut chosen: Vec<bool> = slots.iter().map(|_| rng.random_bool(REPLACE_PROBABILITY)).collect();
    if !chosen.iter().any(|&c| c) {
        let pick = rng.random_range(0..slots.len());
        chosen[pick] = true;
    }

    let mut text = String::with_capacity(record.text.len() + 16);
    let mut cursor = 0;
    for ((range, candidates), replace) in slots.iter().zip(chosen) {
        text.push_str(&record.text[cursor..range.start]);
        let original = &record.text[range.clone()];
        if replace {
            let synonym = &candidates[rng.random_range(0..candidates.len())];
            text.push_str(&match_case(original, synonym));
        } else {
            text.push_str(original);
        }
        cursor = range.end;
    }
    text.push_str(&record.text[cursor..]);

    Ok(TweetRecord {
        id: format!("{}~aug-{seed}", record.id),
        text,
        created_at: record.created_at,
        device: record.device.clone(),
        info_type: record.info_type,
        votes: Vec::new(),
        disclosure: record.disclosure,
        augmented_from: Some(record.id.clone()),
    })
}

/// Target record count per (info_type, disclosure) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationPlan {
    pub targets: BTreeMap<Cell, usize>,
    pub seed: u64,
}

impl AugmentationPlan {
    pub fn new(targets: BTreeMap<Cell, usize>, seed: u64) -> Result<Self> {
        if let Some((cell, _)) = targets.iter().find(|(_, &n)| n == 0) {
            return Err(Error::InvalidArgument(format!("target for {cell} must be positive")));
        }
        Ok(AugmentationPlan { targets, seed })
    }

    /// The same target for all six cells.
    pub fn uniform(per_cell: usize, seed: u64) -> Result<Self> {
        Self::new(Cell::all().map(|c| (c, per_cell)).collect(), seed)
    }

    pub fn total(&self) -> usize {
        self.targets.values().sum()
    }
}

/// Per-cell change applied by [`balance_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellDelta {
    pub before: usize,
    pub after: usize,
    pub augmented: usize,
    pub dropped: usize,
}

/// Brings every planned cell to exactly its target.
///
/// Surplus cells are downsampled uniformly without replacement. Deficit cells
/// receive augmented copies of seeded, randomly drawn source records; sources
/// come only from the input, and are drawn without replacement until the cell
/// is exhausted. Kept records retain their input order; augmented records
/// follow, grouped by cell.
pub fn balance_corpus(corpus: &Corpus, plan: &AugmentationPlan, lexicon: &dyn Lexicon) -> Result<Corpus> {
    balance_corpus_with_report(corpus, plan, lexicon).map(|(c, _)| c)
}

pub fn balance_corpus_with_report(
    corpus: &Corpus,
    plan: &AugmentationPlan,
    lexicon: &dyn Lexicon,
) -> Result<(Corpus, BTreeMap<Cell, CellDelta>)> {
    let mut members: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
    for (idx, record) in corpus.records().iter().enumerate() {
        let cell = record.cell().ok_or_else(|| Error::Unlabeled(record.id.clone()))?;
        members.entry(cell).or_default().push(idx);
    }
    for cell in plan.targets.keys() {
        if members.get(cell).is_none_or(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("cell {cell} has no records to balance")));
        }
    }

    let mut taken_ids: HashSet<String> = corpus.ids().map(str::to_string).collect();
    let mut dropped: HashSet<usize> = HashSet::new();
    let mut augmented: Vec<TweetRecord> = Vec::new();
    let mut report = BTreeMap::new();

    for (&cell, &target) in &plan.targets {
        let cell_members = &members[&cell];
        let have = cell_members.len();
        let mut rng = derived_rng(plan.seed, &format!("balance/{cell}"));
        let mut delta = CellDelta {
            before: have,
            after: target,
            augmented: 0,
            dropped: 0,
        };
        if target < have {
            let keep: HashSet<usize> = index::sample(&mut rng, have, target).into_iter().collect();
            for (pos, &idx) in cell_members.iter().enumerate() {
                if !keep.contains(&pos) {
                    dropped.insert(idx);
                }
            }
            delta.dropped = have - target;
        } else if target > have {
            let deficit = target - have;
            let mut order = cell_members.clone();
            order.shuffle(&mut rng);
            let mut produced = 0;
            let mut draw = 0usize;
            let mut failures_in_row = 0usize;
            while produced < deficit {
                let source = &corpus.records()[order[draw % order.len()]];
                let draw_seed = plan.seed.wrapping_add(draw as u64);
                draw += 1;
                match augment_record(source, lexicon, draw_seed) {
                    Ok(mut record) => {
                        failures_in_row = 0;
                        let mut n = 1;
                        let mut id = format!("{}~aug{n}", source.id);
                        while taken_ids.contains(&id) {
                            n += 1;
                            id = format!("{}~aug{n}", source.id);
                        }
                        taken_ids.insert(id.clone());
                        record.id = id;
                        augmented.push(record);
                        produced += 1;
                    }
                    Err(Error::NoReplaceableWord(_)) => {
                        failures_in_row += 1;
                        if failures_in_row >= order.len() {
                            return Err(Error::NoAugmentableSource(cell.to_string()));
                        }
                    }
                    Err(other) => return Err(other),
                }
            }
            delta.augmented = deficit;
        }
        report.insert(cell, delta);
    }

    let mut records: Vec<TweetRecord> = corpus
        .records()
        .iter()
        .enumerate()
        .filter(|(idx, _)| !dropped.contains(idx))
        .map(|(_, r)| r.clone())
        .collect();
    records.extend(augmented);
    let provenance = format!("{} [balanced, seed {}]", corpus.provenance, plan.seed);
    Ok((Corpus::new(records, provenance)?, report))
}
