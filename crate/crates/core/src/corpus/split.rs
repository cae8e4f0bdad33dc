use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;

use super::{Corpus, InfoType, TweetRecord};
use crate::error::{Error, Result};
use crate::util::seeded_rng;

/// Disjoint train/validation/test partition of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
    pub seed: u64,
}

impl SplitSet {
    pub fn total_len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

fn share(n: usize, fraction: f64, max: usize) -> usize {
    ((n as f64 * fraction).round() as usize).min(max)
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {f}")))
    }
}

/// Stratified train/validation/test split keyed on (info_type, disclosure).
///
/// Within each cell the records are shuffled with a seeded RNG, the first
/// `round(n * test_fraction)` go to test, and of the remainder
/// `round(m * val_fraction_of_train)` go to validation. Every part keeps the
/// original corpus order.
pub fn stratified_split(
    corpus: &Corpus,
    test_fraction: f64,
    val_fraction_of_train: f64,
    seed: u64,
) -> Result<SplitSet> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty corpus".into()));
    }
    check_fraction("test_fraction", test_fraction)?;
    check_fraction("val_fraction_of_train", val_fraction_of_train)?;

    let mut cells: BTreeMap<(InfoType, Option<bool>), Vec<usize>> = BTreeMap::new();
    for (idx, record) in corpus.records().iter().enumerate() {
        cells
            .entry((record.info_type, record.disclosure))
            .or_default()
            .push(idx);
    }

    let mut rng = seeded_rng(seed);
    let mut test_idx = HashSet::new();
    let mut val_idx = HashSet::new();
    for ((info_type, disclosure), mut members) in cells {
        if members.len() < 3 {
            let label = match disclosure {
                Some(true) => "disclosure",
                Some(false) => "non-disclosure",
                None => "unlabeled",
            };
            return Err(Error::CellTooSmall {
                cell: format!("{info_type}/{label}"),
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n_test = share(members.len(), test_fraction, members.len() - 1);
        let remaining = members.len() - n_test;
        let n_val = share(remaining, val_fraction_of_train, remaining - 1);
        test_idx.extend(members[..n_test].iter().copied());
        val_idx.extend(members[n_test..n_test + n_val].iter().copied());
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for (idx, record) in corpus.records().iter().enumerate() {
        let bucket: &mut Vec<TweetRecord> = if test_idx.contains(&idx) {
            &mut test
        } else if val_idx.contains(&idx) {
            &mut validation
        } else {
            &mut train
        };
        bucket.push(record.clone());
    }

    // Augmented records may reference a source that landed in another part.
    let part = |records: Vec<TweetRecord>, name: &str| -> Result<Corpus> {
        let ids: HashSet<String> = records.iter().map(|r| r.id.clone()).collect();
        let records = records
            .into_iter()
            .map(|mut r| {
                if r.augmented_from.as_ref().is_some_and(|src| !ids.contains(src)) {
                    r.augmented_from = None;
                }
                r
            })
            .collect();
        Corpus::new(records, format!("{} [{name}, seed {seed}]", corpus.provenance))
    };

    Ok(SplitSet {
        train: part(train, "train")?,
        validation: part(validation, "validation")?,
        test: part(test, "test")?,
        seed,
    })
}
