//! Text cleaning that keeps punctuation and stopwords, and conversion of
//! cleaned text into fixed-length encoder inputs.

mod tokenizer;

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::{Regex, RegexSet};

use crate::error::{Error, Result};

pub use tokenizer::{tokenize_encode, EncoderInput, HashTokenizer, TokenizerBackend};

/// The noisy-token list shipped with the crate.
pub const DEFAULT_NOISE_PATTERNS: &str = include_str!("../../data/noise_tokens.txt");

/// Text that passed [`clean_text`]. Only constructible through cleaning.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CleanedText(String);

impl CleanedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Whitespace-delimited tokens in surface order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ')
    }
}

impl AsRef<str> for CleanedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CleanedText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whole-token patterns that mark a token as noise.
#[derive(Debug, Clone)]
pub struct NoiseList {
    patterns: Vec<String>,
    set: RegexSet,
}

impl NoiseList {
    /// Parses one pattern per line; blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Result<NoiseList> {
        let mut patterns = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            Regex::new(line).map_err(|e| Error::NoisePattern {
                line: idx + 1,
                reason: e.to_string(),
            })?;
            patterns.push(line.to_string());
        }
        let anchored: Vec<String> = patterns.iter().map(|p| format!("^(?:{p})$")).collect();
        let set = RegexSet::new(&anchored).map_err(|e| Error::NoisePattern {
            line: 0,
            reason: e.to_string(),
        })?;
        Ok(NoiseList { patterns, set })
    }

    pub fn load(path: &Path) -> Result<NoiseList> {
        let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&source)
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn is_noise(&self, token: &str) -> bool {
        self.set.is_match(token)
    }
}

impl Default for NoiseList {
    fn default() -> Self {
        static DEFAULT: OnceLock<NoiseList> = OnceLock::new();
        DEFAULT
            .get_or_init(|| NoiseList::parse(DEFAULT_NOISE_PATTERNS).expect("bundled noise list parses"))
            .clone()
    }
}

fn is_special_char(c: char) -> bool {
    static SPECIAL: OnceLock<Regex> = OnceLock::new();
    let re = SPECIAL.get_or_init(|| Regex::new(r"[\p{Cf}\p{Co}\p{So}\p{Sk}\u{FFFD}]").unwrap());
    let mut buf = [0u8; 4];
    re.is_match(c.encode_utf8(&mut buf))
}

/// Collapses runs of the same punctuation character to one occurrence.
fn collapse_punct_runs(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut prev: Option<char> = None;
    for c in token.chars() {
        if prev == Some(c) && c.is_ascii_punctuation() {
            continue;
        }
        out.push(c);
        prev = Some(c);
    }
    out
}

fn clean_token(token: &str, noise: &NoiseList) -> Option<String> {
    let token: String = token.chars().filter(|&c| c != '#').collect();
    if token.is_empty() || token.starts_with('@') {
        return None;
    }
    let token: String = token.chars().filter(|&c| c != '@').collect();
    if token.is_empty() || noise.is_noise(&token) {
        return None;
    }
    let token = collapse_punct_runs(&token);
    if noise.is_noise(&token) {
        return None;
    }
    Some(token)
}

/// Cleans a raw post with an explicit noise list.
///
/// Mentions are dropped whole, `#` is removed but the hashtag word kept,
/// control/format/symbol characters are removed, noise tokens are dropped and
/// repeated punctuation collapses to a single mark. Ordinary punctuation,
/// stopwords and word order survive.
pub fn clean_text_with(raw: &str, noise: &NoiseList) -> Result<CleanedText> {
    let normalized: String = raw
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() || c.is_control() {
                Some(' ')
            } else if is_special_char(c) {
                None
            } else {
                Some(c)
            }
        })
        .collect();
    let kept: Vec<String> = normalized
        .split_whitespace()
        .filter_map(|t| clean_token(t, noise))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }
    Ok(CleanedText(kept.join(" ")))
}

/// [`clean_text_with`] using the bundled noise list.
pub fn clean_text(raw: &str) -> Result<CleanedText> {
    static NOISE: OnceLock<NoiseList> = OnceLock::new();
    clean_text_with(raw, NOISE.get_or_init(NoiseList::default))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_text_is_unchanged() {
        assert_eq!(clean_text("he said; the end.").unwrap().as_str(), "he said; the end.");
    }

    #[test]
    fn emoticons_and_bursts_removed() {
        assert_eq!(
            clean_text("Feeling sick today :-) !!!").unwrap().as_str(),
            "Feeling sick today"
        );
    }

    #[test]
    fn mentions_dropped_hashtags_kept() {
        assert_eq!(
            clean_text("@john I was in clinic; sad. #health").unwrap().as_str(),
            "I was in clinic; sad. health"
        );
    }

    #[test]
    fn attached_runs_collapse() {
        assert_eq!(clean_text("so tired!!! why??").unwrap().as_str(), "so tired! why?");
        assert_eq!(clean_text("wait... what").unwrap().as_str(), "wait. what");
    }

    #[test]
    fn single_marks_survive() {
        assert_eq!(clean_text("a , b ; c : d").unwrap().as_str(), "a , b ; c : d");
    }

    #[test]
    fn listed_noise_examples() {
        for noisy in [";-", "!!!", ":-)", ";)", ":(", "<3", "?!", ":'("] {
            let cleaned = clean_text(&format!("ok {noisy} fine")).unwrap();
            assert_eq!(cleaned.as_str(), "ok fine", "{noisy}");
        }
    }

    #[test]
    fn control_and_symbol_chars_removed() {
        assert_eq!(
            clean_text("bad\u{200B}day\u{FFFD} \u{1F600} ok\u{0007}go").unwrap().as_str(),
            "badday ok go"
        );
    }

    #[test]
    fn email_at_sign_stripped() {
        let cleaned = clean_text("mail me@home now").unwrap();
        assert!(!cleaned.as_str().contains('@'));
        assert_eq!(cleaned.as_str(), "mail mehome now");
    }

    #[test]
    fn empty_result_is_error() {
        assert!(matches!(clean_text("@a @b :-) !!!"), Err(Error::EmptyAfterCleaning)));
        assert!(matches!(clean_text("   "), Err(Error::EmptyAfterCleaning)));
    }

    #[test]
    fn bad_pattern_reports_line() {
        let err = NoiseList::parse("# c\n(unclosed\n").unwrap_err();
        assert!(matches!(err, Error::NoisePattern { line: 2, .. }));
    }

    #[test]
    fn custom_list() {
        let noise = NoiseList::parse("lol\n").unwrap();
        assert_eq!(clean_text_with("lol that was fun :)", &noise).unwrap().as_str(), "that was fun :)");
    }

    proptest! {
        #[test]
        fn idempotent(raw in "[a-zA-Z@#!?.,;:()\\-' \u{1F600}\u{200B}]{1,60}") {
            if let Ok(once) = clean_text(&raw) {
                let twice = clean_text(once.as_str()).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn no_markers_survive(raw in "[a-z@#!:)( ]{1,40}") {
            if let Ok(cleaned) = clean_text(&raw) {
                prop_assert!(!cleaned.as_str().contains('@'));
                prop_assert!(!cleaned.as_str().contains('#'));
            }
        }

        #[test]
        fn word_order_preserved(words in proptest::collection::vec("[a-z]{1,8}", 1..12)) {
            let raw = words.join(" ! ");
            let cleaned = clean_text(&raw).unwrap();
            let kept: Vec<&str> = cleaned.words().filter(|w| *w != "!").collect();
            prop_assert_eq!(kept, words.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }
}
