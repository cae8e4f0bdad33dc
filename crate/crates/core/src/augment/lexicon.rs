use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::InfoType;
use crate::error::{Error, Result};

/// Domain-filtered synonym source.
pub trait Lexicon: Send + Sync {
    fn name(&self) -> String;

    /// Synonyms of `word` within `domain`, in a stable order. Implementations
    /// may return the query word; [`super::synonym_candidates`] filters it.
    fn lookup(&self, word: &str, domain: InfoType) -> Result<Vec<String>>;
}

/// Bundled fixture lexicon covering the synthetic corpus vocabulary.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.tsv");

/// Table-backed lexicon read from `word<TAB>domain<TAB>syn1,syn2,...` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureLexicon {
    entries: HashMap<(String, InfoType), Vec<String>>,
}

impl FixtureLexicon {
    pub fn parse(source: &str) -> Result<FixtureLexicon> {
        let mut entries: HashMap<(String, InfoType), Vec<String>> = HashMap::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::LexiconUnavailable(format!(
                    "line {}: expected 3 tab-separated fields, found {}",
                    idx + 1,
                    fields.len()
                )));
            }
            let domain: InfoType = fields[1]
                .parse()
                .map_err(|e: Error| Error::LexiconUnavailable(format!("line {}: {e}", idx + 1)))?;
            let slot = entries.entry((fields[0].trim().to_lowercase(), domain)).or_default();
            for syn in fields[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                if !slot.iter().any(|s| s == syn) {
                    slot.push(syn.to_string());
                }
            }
        }
        Ok(FixtureLexicon { entries })
    }

    pub fn load(path: &Path) -> Result<FixtureLexicon> {
        let source = fs::read_to_string(path)
            .map_err(|e| Error::LexiconUnavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&source)
    }

    pub fn bundled() -> FixtureLexicon {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }

    pub fn insert(&mut self, word: &str, domain: InfoType, synonyms: &[&str]) {
        self.entries
            .entry((word.to_lowercase(), domain))
            .or_default()
            .extend(synonyms.iter().map(|s| s.to_string()));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Lexicon for FixtureLexicon {
    fn name(&self) -> String {
        "fixture-lexicon".into()
    }

    fn lookup(&self, word: &str, domain: InfoType) -> Result<Vec<String>> {
        Ok(self
            .entries
            .get(&(word.to_lowercase(), domain))
            .cloned()
            .unwrap_or_default())
    }
}

/// WordNet domain labels accepted for each information type.
pub fn wordnet_domains(domain: InfoType) -> &'static [&'static str] {
    match domain {
        InfoType::Health => &[
            "medicine",
            "pharmacy",
            "physiology",
            "anatomy",
            "psychiatry",
            "dentistry",
            "surgery",
            "radiology",
            "health",
        ],
        InfoType::Finance => &[
            "economy",
            "banking",
            "money",
            "finance",
            "commerce",
            "tax",
            "insurance",
            "exchange",
            "book_keeping",
            "enterprise",
        ],
        InfoType::Relationship => &["sociology", "sexuality", "person", "law", "psychological_features"],
    }
}

/// Synonyms from the WordNet database files (`data.noun`, `data.verb`,
/// `data.adj`, `data.adv`) restricted by a WordNet Domains mapping
/// (`<offset>-<pos><TAB><domain> <domain>...`).
#[derive(Debug, Clone, Default)]
pub struct WordNetLexicon {
    word_synsets: HashMap<String, Vec<String>>,
    synset_words: HashMap<String, Vec<String>>,
    synset_domains: HashMap<String, BTreeSet<String>>,
}

const DATA_FILES: [(&str, char); 4] = [("data.noun", 'n'), ("data.verb", 'v'), ("data.adj", 'a'), ("data.adv", 'r')];

fn normalize_lemma(raw: &str) -> String {
    // Adjective markers such as `(a)` or `(ip)` trail the lemma.
    let lemma = raw.split('(').next().unwrap_or(raw);
    lemma.replace('_', " ").to_lowercase()
}

impl WordNetLexicon {
    pub fn load(dict_dir: &Path, domains_file: &Path) -> Result<WordNetLexicon> {
        let unavailable = |p: &Path, e: std::io::Error| Error::LexiconUnavailable(format!("{}: {e}", p.display()));
        let mut lexicon = WordNetLexicon::default();
        let mut found_any = false;
        for (file, pos) in DATA_FILES {
            let path = dict_dir.join(file);
            if !path.exists() {
                continue;
            }
            found_any = true;
            let body = fs::read_to_string(&path).map_err(|e| unavailable(&path, e))?;
            lexicon.ingest_data(&body, pos);
        }
        if !found_any {
            return Err(Error::LexiconUnavailable(format!(
                "no WordNet data files under {}",
                dict_dir.display()
            )));
        }
        let domains = fs::read_to_string(domains_file).map_err(|e| unavailable(domains_file, e))?;
        lexicon.ingest_domains(&domains);
        Ok(lexicon)
    }

    fn ingest_data(&mut self, body: &str, pos: char) {
        for line in body.lines() {
            if line.starts_with(' ') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 4 {
                continue;
            }
            let Ok(w_cnt) = usize::from_str_radix(fields[3], 16) else {
                continue;
            };
            let key = format!("{}-{pos}", fields[0]);
            let mut words = Vec::with_capacity(w_cnt);
            for i in 0..w_cnt {
                if let Some(raw) = fields.get(4 + 2 * i) {
                    let lemma = normalize_lemma(raw);
                    if !words.contains(&lemma) {
                        words.push(lemma);
                    }
                }
            }
            for word in &words {
                self.word_synsets.entry(word.clone()).or_default().push(key.clone());
            }
            self.synset_words.insert(key, words);
        }
    }

    fn ingest_domains(&mut self, body: &str) {
        for line in body.lines() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            // satellite adjectives share the adjective domain entries
            let key = key.replace("-s", "-a");
            self.synset_domains
                .entry(key)
                .or_default()
                .extend(parts.map(str::to_string));
        }
    }
}

impl Lexicon for WordNetLexicon {
    fn name(&self) -> String {
        "wordnet-domains".into()
    }

    fn lookup(&self, word: &str, domain: InfoType) -> Result<Vec<String>> {
        let word = word.to_lowercase();
        let accepted = wordnet_domains(domain);
        let mut out: Vec<String> = Vec::new();
        for key in self.word_synsets.get(&word).into_iter().flatten() {
            let in_domain = self
                .synset_domains
                .get(key)
                .is_some_and(|ds| ds.iter().any(|d| accepted.contains(&d.as_str())));
            if !in_domain {
                continue;
            }
            for syn in &self.synset_words[key] {
                if *syn != word && !out.contains(syn) {
                    out.push(syn.clone());
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA_NOUN: &str = "  1 This software and database is being provided\n\
14070360 26 n 02 illness 0 unwellness 0 001 @ 14061805 n 0000 | impairment of normal physiological function\n\
14299637 26 n 01 sickness 0 000 | some gloss\n\
07309781 04 n 02 illness 0 sickness 0 000 | another gloss\n\
13398241 21 n 02 debt 0 indebtedness 0 000 | money owed\n";
    const DATA_ADJ: &str = "01176431 00 s 02 sick(p) 0 ill(p) 0 000 | affected by an impairment\n";
    const DOMAINS: &str = "14070360-n\tmedicine\n07309781-n\tfactotum\n13398241-n\tbanking economy\n01176431-s\tmedicine\n";

    fn fixture() -> (tempfile::TempDir, WordNetLexicon) {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("data.noun"), DATA_NOUN).unwrap();
        fs::write(dir.path().join("data.adj"), DATA_ADJ).unwrap();
        fs::write(dir.path().join("domains.txt"), DOMAINS).unwrap();
        let lex = WordNetLexicon::load(dir.path(), &dir.path().join("domains.txt")).unwrap();
        (dir, lex)
    }

    #[test]
    fn wordnet_filters_by_domain() {
        let (_dir, lex) = fixture();
        assert_eq!(lex.lookup("illness", InfoType::Health).unwrap(), vec!["unwellness"]);
        assert_eq!(lex.lookup("sick", InfoType::Health).unwrap(), vec!["ill"]);
        assert!(lex.lookup("illness", InfoType::Finance).unwrap().is_empty());
        assert_eq!(lex.lookup("debt", InfoType::Finance).unwrap(), vec!["indebtedness"]);
        assert!(lex.lookup("sickness", InfoType::Health).unwrap().is_empty());
    }

    #[test]
    fn wordnet_missing_dir_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            WordNetLexicon::load(dir.path(), &dir.path().join("x")),
            Err(Error::LexiconUnavailable(_))
        ));
    }

    #[test]
    fn fixture_parse_and_lookup() {
        let lex = FixtureLexicon::parse("# c\nsick\thealth\till, unwell\n").unwrap();
        assert_eq!(lex.lookup("Sick", InfoType::Health).unwrap(), vec!["ill", "unwell"]);
        assert!(lex.lookup("sick", InfoType::Finance).unwrap().is_empty());
    }

    #[test]
    fn fixture_rejects_bad_lines() {
        assert!(FixtureLexicon::parse("sick health ill\n").is_err());
        assert!(FixtureLexicon::parse("sick\tweather\till\n").is_err());
    }

    #[test]
    fn bundled_lexicon_loads() {
        assert!(FixtureLexicon::bundled().len() > 100);
    }
}
