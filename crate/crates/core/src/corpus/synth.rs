//! Deterministic template-based corpus for offline runs.
//!
//! Disclosure and non-disclosure templates of the same information type
//! share their topical keywords; they differ in who the text is about and
//! in sentence structure. Disclosure posts lean towards late hours and
//! phone clients, which gives the metadata channel a weak, realistic cue.
//!
//! A share of records can be made ambiguous: their text comes from a pool
//! shared by both disclosure classes of a type, so only the metadata hints
//! at the label. This is the "confusable" corpus used for ablations.

use std::collections::BTreeMap;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::Rng;

use super::{Cell, Corpus, InfoType, TweetRecord};
use crate::error::{Error, Result};
use crate::util::derived_rng;

pub const DEVICES: [&str; 6] = [
    "Twitter for iPhone",
    "Twitter for Android",
    "Twitter for iPad",
    "Twitter Web App",
    "TweetDeck",
    "Hootsuite",
];
const MOBILE: [&str; 3] = ["Twitter for iPhone", "Twitter for Android", "Twitter for iPad"];
const DESKTOP: [&str; 3] = ["Twitter Web App", "TweetDeck", "Hootsuite"];
const NIGHT_HOURS: [u32; 8] = [20, 21, 22, 23, 0, 1, 2, 3];
const DAY_HOURS: [u32; 11] = [8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18];

const WHEN: [&str; 7] = [
    "last week",
    "yesterday",
    "this morning",
    "two days ago",
    "last month",
    "today",
    "last night",
];
const RELATIVE: [&str; 8] = [
    "mom",
    "dad",
    "brother",
    "sister",
    "son",
    "daughter",
    "best friend",
    "uncle",
];

const HEALTH_KEYS: [&str; 10] = [
    "diabetes",
    "cancer",
    "depression",
    "asthma",
    "migraines",
    "anxiety",
    "insomnia",
    "pneumonia",
    "arthritis",
    "a heart condition",
];
const FINANCE_KEYS: [&str; 10] = [
    "loan",
    "mortgage",
    "rent",
    "credit card bill",
    "student loan",
    "car payment",
    "tax bill",
    "medical bill",
    "payday loan",
    "overdraft",
];
const RELATIONSHIP_KEYS: [&str; 8] = [
    "divorce",
    "breakup",
    "separation",
    "affair",
    "custody battle",
    "engagement",
    "marriage",
    "wedding",
];

const HEALTH_DISCLOSURE: [&str; 6] = [
    "I was diagnosed with {k} {w} and I am so scared",
    "my {r} has {k} and nobody in the family knows yet",
    "just got back from the clinic, I have {k} and the pills are not working",
    "I have been fighting {k} for years and today was the worst day",
    "my doctor says my {k} is getting worse, I feel sick all the time",
    "cannot sleep because my {k} came back {w}",
];
const HEALTH_NON_DISCLOSURE: [&str; 6] = [
    "new study shows {k} cases are rising across the country",
    "tips for people living with {k}, share with anyone who needs it",
    "does anyone know if {k} is hereditary?",
    "great article about {k} research from the university {w}",
    "{k} awareness month starts {w}, please share the info",
    "doctors say early screening for {k} saves lives",
];
const FINANCE_DISCLOSURE: [&str; 6] = [
    "I lost my job and cannot pay my {k} this month",
    "my {k} is overdue and the bank keeps calling me {w}",
    "I had to borrow money from my {r} to cover my {k}",
    "I am drowning in debt, my {k} doubled {w}",
    "just got denied for a {k} because my credit score is terrible",
    "my {r} does not know I spent our savings on my {k}",
];
const FINANCE_NON_DISCLOSURE: [&str; 6] = [
    "how to refinance a {k} with low interest rates",
    "the bank announced new {k} rules {w}",
    "five tips to pay off any {k} faster",
    "is it smart to take a {k} in this economy?",
    "news: {k} defaults are rising across the country",
    "financial experts explain the {k} changes coming next year",
];
const RELATIONSHIP_DISCLOSURE: [&str; 6] = [
    "my {k} is destroying me, I cannot stop crying",
    "my husband and I are going through a {k} and I feel alone",
    "I found out about the {k} {w} and I cannot trust anyone now",
    "I told my {r} about my {k} and they stopped talking to me",
    "still not over my {k}, everything at home reminds me of it",
    "my wife wants a {k} after ten years together",
];
const RELATIONSHIP_NON_DISCLOSURE: [&str; 6] = [
    "celebrity {k} is all over the news {w}",
    "what is the best advice for surviving a {k}?",
    "new book about {k} and modern love is out {w}",
    "statistics show {k} rates dropped across the country",
    "podcast episode on {k} and family life drops tonight",
    "lawyers explain what happens during a {k}",
];

const AMBIGUOUS: [&str; 5] = [
    "thinking about {k} a lot {w}",
    "{k} again, what a week",
    "cannot stop reading about {k}",
    "{k} is on my mind {w}",
    "so much {k} talk lately",
];

fn templates(cell: Cell) -> (&'static [&'static str], &'static [&'static str]) {
    match (cell.info_type, cell.disclosure) {
        (InfoType::Health, true) => (&HEALTH_DISCLOSURE, &HEALTH_KEYS),
        (InfoType::Health, false) => (&HEALTH_NON_DISCLOSURE, &HEALTH_KEYS),
        (InfoType::Finance, true) => (&FINANCE_DISCLOSURE, &FINANCE_KEYS),
        (InfoType::Finance, false) => (&FINANCE_NON_DISCLOSURE, &FINANCE_KEYS),
        (InfoType::Relationship, true) => (&RELATIONSHIP_DISCLOSURE, &RELATIONSHIP_KEYS),
        (InfoType::Relationship, false) => (&RELATIONSHIP_NON_DISCLOSURE, &RELATIONSHIP_KEYS),
    }
}

/// Generates `n_per_cell` records for each of the six
/// (info_type, disclosure) cells. A pure function of its arguments.
pub fn synth_corpus(n_per_cell: usize, seed: u64) -> Result<Corpus> {
    synth_corpus_with(n_per_cell, seed, 0.0)
}

/// Like [`synth_corpus`], but each record's text is drawn from the shared
/// ambiguous pool with probability `ambiguous_share`.
pub fn synth_corpus_with(n_per_cell: usize, seed: u64, ambiguous_share: f64) -> Result<Corpus> {
    if n_per_cell == 0 {
        return Err(Error::InvalidArgument("n_per_cell must be at least 1".into()));
    }
    let counts = Cell::all().map(|c| (c, n_per_cell)).collect();
    let mut corpus = synth_corpus_counts(&counts, seed, ambiguous_share)?;
    let mut provenance = format!("synthetic corpus: n_per_cell={n_per_cell}, seed={seed}");
    if ambiguous_share > 0.0 {
        provenance.push_str(&format!(", ambiguous_share={ambiguous_share}"));
    }
    corpus.provenance = provenance;
    Ok(corpus)
}

/// Synthetic corpus with an explicit record count per cell. Cells missing
/// from `counts` stay empty. A cell's records do not depend on the counts
/// of other cells.
pub fn synth_corpus_counts(counts: &BTreeMap<Cell, usize>, seed: u64, ambiguous_share: f64) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&ambiguous_share) {
        return Err(Error::InvalidArgument(format!(
            "ambiguous share must lie in [0, 1], got {ambiguous_share}"
        )));
    }
    let epoch = Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap();
    let mut records = Vec::with_capacity(counts.values().sum());
    for (&cell, &n) in counts {
        let mut rng = derived_rng(seed, &format!("synth/{cell}"));
        let (sentences, keys) = templates(cell);
        for i in 0..n {
            let ambiguous = ambiguous_share > 0.0 && rng.random_bool(ambiguous_share);
            let template = if ambiguous {
                AMBIGUOUS[rng.random_range(0..AMBIGUOUS.len())]
            } else {
                sentences[rng.random_range(0..sentences.len())]
            };
            let text = template
                .replace("{k}", keys.choose(&mut rng).unwrap())
                .replace("{w}", WHEN.choose(&mut rng).unwrap())
                .replace("{r}", RELATIVE.choose(&mut rng).unwrap());

            let typical = rng.random_bool(0.7);
            let (hours, devices): (&[u32], &[&str]) = match (cell.disclosure, typical) {
                (true, true) | (false, false) => (&NIGHT_HOURS, &MOBILE),
                (true, false) | (false, true) => (&DAY_HOURS, &DESKTOP),
            };
            let hour = *hours.choose(&mut rng).unwrap();
            let device = devices.choose(&mut rng).unwrap().to_string();
            let created_at = epoch
                + Duration::days(rng.random_range(0..120))
                + Duration::hours(i64::from(hour))
                + Duration::minutes(rng.random_range(0..60))
                + Duration::seconds(rng.random_range(0..60));

            // Three annotators, at most one dissenting.
            let mut votes = vec![cell.disclosure; 3];
            if rng.random_bool(0.2) {
                let who = rng.random_range(0..3);
                votes[who] = !cell.disclosure;
            }

            let tag = if cell.disclosure { "d" } else { "n" };
            records.push(TweetRecord {
                id: format!("syn{seed}-{}-{tag}-{i:05}", cell.info_type),
                text,
                created_at: Some(created_at),
                device,
                info_type: cell.info_type,
                votes,
                disclosure: Some(cell.disclosure),
                augmented_from: None,
            });
        }
    }
    Corpus::new(records, format!("synthetic corpus: seed={seed}, counts={counts:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_per_cell() {
        let corpus = synth_corpus(1, 0).unwrap();
        assert_eq!(corpus.len(), 6);
        let counts = corpus.cell_counts();
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&c| c == 1));
    }

    #[test]
    fn hundred_per_cell() {
        let corpus = synth_corpus(100, 7).unwrap();
        assert_eq!(corpus.len(), 600);
        assert!(corpus.cell_counts().values().all(|&c| c == 100));
    }

    #[test]
    fn byte_identical_per_seed() {
        let a = synth_corpus(25, 99).unwrap().to_jsonl_string();
        let b = synth_corpus(25, 99).unwrap().to_jsonl_string();
        assert_eq!(a, b);
        assert_ne!(a, synth_corpus(25, 100).unwrap().to_jsonl_string());
    }

    #[test]
    fn zero_rejected() {
        assert!(synth_corpus(0, 1).is_err());
    }

    #[test]
    fn records_satisfy_invariants() {
        let corpus = synth_corpus(30, 3).unwrap();
        for r in corpus.records() {
            r.validate().unwrap();
            assert!(DEVICES.contains(&r.device.as_str()));
        }
    }

    #[test]
    fn classes_share_keywords() {
        // Every health keyword appears in both disclosure and non-disclosure
        // records given enough samples.
        let corpus = synth_corpus(200, 5).unwrap();
        for key in HEALTH_KEYS {
            for label in [true, false] {
                assert!(corpus.records().iter().any(|r| r.info_type == InfoType::Health
                    && r.disclosure == Some(label)
                    && r.text.contains(key)));
            }
        }
    }

    #[test]
    fn ambiguous_texts_are_shared_between_labels() {
        let corpus = synth_corpus_with(100, 2, 0.5).unwrap();
        let pool = |label: bool| {
            corpus
                .records()
                .iter()
                .filter(|r| r.disclosure == Some(label))
                .map(|r| r.text.clone())
                .collect::<std::collections::HashSet<_>>()
        };
        assert!(pool(true).intersection(&pool(false)).count() > 0);
        assert_eq!(synth_corpus_with(10, 4, 0.0).unwrap(), synth_corpus(10, 4).unwrap());
        assert!(synth_corpus_with(10, 4, 1.5).is_err());
    }
}
