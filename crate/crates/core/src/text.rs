//! Text normalization shared by the index, the retrieval filters and the
//! delexicalizer.
//!
//! Normalization is: split on non-alphanumeric characters (Unicode aware),
//! lowercase, drop stopwords, Porter-stem what is left.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag of the shipped stopword list. Bump whenever the list changes.
pub const STOPWORDS_VERSION: &str = "en-1";

/// Shipped English stopword list.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no", "nor",
    "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves",
    "out", "over", "own", "same", "shall", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your", "yours", "yourself", "yourselves", "s", "t", "don", "isn", "aren", "wasn", "weren",
    "doesn", "didn", "won", "cannot", "usually", "often", "many", "much", "every", "within",
];

/// Splits `text` into maximal runs of alphanumeric characters, preserving case.
pub fn split_words(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Lowercased alphanumeric tokens in order.
pub fn tokenize(text: &str) -> Vec<String> {
    split_words(text).into_iter().map(str::to_lowercase).collect()
}

/// Porter stem of a single (already lowercased) token.
pub fn stem(token: &str) -> String {
    // The stemmer only knows ASCII suffix rules.
    if token.is_ascii() {
        porter_stemmer::stem(token)
    } else {
        token.to_string()
    }
}

/// Stemmed content words of `text` using the shipped stopword list.
pub fn content_word_set(text: &str) -> BTreeSet<String> {
    Analyzer::english().content_words(text)
}

/// Tokenizer, stopword filter and stemmer bundled together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analyzer {
    stopwords_version: String,
    stopwords: BTreeSet<String>,
}

impl Analyzer {
    /// Analyzer with the shipped English stopword list.
    pub fn english() -> &'static Analyzer {
        static ENGLISH: OnceLock<Analyzer> = OnceLock::new();
        ENGLISH.get_or_init(|| {
            Analyzer::with_stopwords(STOPWORDS_VERSION, ENGLISH_STOPWORDS.iter().copied())
        })
    }

    pub fn with_stopwords<I, S>(version: &str, stopwords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            stopwords_version: version.to_string(),
            stopwords: stopwords
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// Loads a stopword list, one word per line. Lines starting with `#` are
    /// ignored.
    pub fn from_stopword_file(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let words = raw
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        Ok(Self::with_stopwords(&format!("file:{}", path.display()), words))
    }

    pub fn stopwords_version(&self) -> &str {
        &self.stopwords_version
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Stemmed non-stopword tokens in text order, with repetitions. These are
    /// the terms the index stores.
    pub fn terms(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| !self.is_stopword(t))
            .map(|t| stem(&t))
            .collect()
    }

    pub fn content_words(&self, text: &str) -> BTreeSet<String> {
        self.terms(text).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn content_words_golden() {
        assert_eq!(
            content_word_set("Rivers erode the rocks they flow over"),
            set(&["river", "erod", "rock", "flow"])
        );
    }

    #[test]
    fn empty_and_all_stopwords() {
        assert!(content_word_set("").is_empty());
        assert!(content_word_set("The the the").is_empty());
    }

    #[test]
    fn tokenize_splits_on_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("Sparks can start a forest-fire."),
            vec!["sparks", "can", "start", "a", "forest", "fire"]
        );
        assert_eq!(tokenize("Ünïcode café"), vec!["ünïcode", "café"]);
    }

    #[test]
    fn stopword_list_is_about_150_words() {
        let n = ENGLISH_STOPWORDS.len();
        assert!((130..=180).contains(&n), "{n}");
        let unique: BTreeSet<_> = ENGLISH_STOPWORDS.iter().collect();
        assert_eq!(unique.len(), n);
    }

    #[test]
    fn custom_stopwords_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stop.txt");
        fs::write(&path, "# comment\nrivers\n\nROCKS\n").unwrap();
        let a = Analyzer::from_stopword_file(&path).unwrap();
        assert_eq!(
            a.content_words("Rivers erode the rocks"),
            set(&["erod", "the"])
        );
    }
}
