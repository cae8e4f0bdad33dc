use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::HashTokenizer;
use crate::util::fnv1a;

/// Dependency relation labels of the English spaCy parser. Forty-five
/// labels; with PAD and UNK they make a 47-entry tag vocabulary.
pub const DEP_LABELS: [&str; 45] = [
    "ROOT", "acl", "acomp", "advcl", "advmod", "agent", "amod", "appos", "attr", "aux", "auxpass", "case", "cc",
    "ccomp", "compound", "conj", "csubj", "csubjpass", "dative", "dep", "det", "dobj", "expl", "intj", "mark",
    "meta", "neg", "nmod", "npadvmod", "nsubj", "nsubjpass", "nummod", "oprd", "parataxis", "pcomp", "pobj",
    "poss", "preconj", "predet", "prep", "prt", "punct", "quantmod", "relcl", "xcomp",
];

/// Produces one dependency relation label per word token.
pub trait ParserBackend: Send + Sync {
    fn name(&self) -> String;

    fn parse(&self, text: &str) -> Result<Vec<String>>;

    fn parse_batch(&self, texts: &[&str]) -> Result<Vec<Vec<String>>> {
        texts.iter().map(|t| self.parse(t)).collect()
    }
}

/// Offline parser double: punctuation gets `punct`, every other word a
/// label picked by hashing its lowercased form.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubParser;

impl StubParser {
    pub fn tag_for(word: &str) -> &'static str {
        if word.chars().all(|c| c.is_ascii_punctuation()) {
            return "punct";
        }
        let labels: Vec<&str> = DEP_LABELS.iter().copied().filter(|l| *l != "punct").collect();
        labels[(fnv1a(word.to_lowercase().as_bytes()) % labels.len() as u64) as usize]
    }
}

impl ParserBackend for StubParser {
    fn name(&self) -> String {
        "stub-parser".into()
    }

    fn parse(&self, text: &str) -> Result<Vec<String>> {
        Ok(HashTokenizer::pieces(text)
            .iter()
            .map(|w| Self::tag_for(w).to_string())
            .collect())
    }
}

const SPACY_SCRIPT: &str = r#"
import json, sys
import spacy
nlp = spacy.load(sys.argv[1], disable=["ner", "lemmatizer", "textcat"])
texts = json.load(sys.stdin)
json.dump([[t.dep_ for t in doc] for doc in nlp.pipe(texts)], sys.stdout)
"#;

/// spaCy dependency parser driven through a Python subprocess.
///
/// Needs a Python interpreter with `spacy` and the named model installed.
/// Each batch call spawns one interpreter, so prefer [`ParserBackend::parse_batch`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpacyParser {
    pub python: PathBuf,
    pub model: String,
}

impl Default for SpacyParser {
    fn default() -> Self {
        SpacyParser {
            python: PathBuf::from("python3"),
            model: "en_core_web_sm".into(),
        }
    }
}

impl SpacyParser {
    /// Runs a one-word parse to confirm the interpreter and model load.
    pub fn probe(&self) -> Result<()> {
        self.parse("ok").map(|_| ())
    }
}

impl ParserBackend for SpacyParser {
    fn name(&self) -> String {
        format!("spacy/{}", self.model)
    }

    fn parse(&self, text: &str) -> Result<Vec<String>> {
        let mut out = self.parse_batch(&[text])?;
        Ok(out.pop().unwrap_or_default())
    }

    fn parse_batch(&self, texts: &[&str]) -> Result<Vec<Vec<String>>> {
        let unavailable = |reason: String| Error::ParserUnavailable(format!("{}: {reason}", self.name()));
        let mut child = Command::new(&self.python)
            .arg("-c")
            .arg(SPACY_SCRIPT)
            .arg(&self.model)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| unavailable(e.to_string()))?;
        let payload = serde_json::to_vec(texts)?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&payload)
            .map_err(|e| unavailable(e.to_string()))?;
        let output = child.wait_with_output().map_err(|e| unavailable(e.to_string()))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let last = stderr.lines().last().unwrap_or("").to_string();
            return Err(unavailable(last));
        }
        let parsed: Vec<Vec<String>> =
            serde_json::from_slice(&output.stdout).map_err(|e| unavailable(e.to_string()))?;
        if parsed.len() != texts.len() {
            return Err(unavailable(format!("expected {} parses, got {}", texts.len(), parsed.len())));
        }
        Ok(parsed)
    }
}
