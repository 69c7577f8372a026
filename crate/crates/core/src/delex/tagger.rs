//! Coarse part-of-speech tagging from a shipped lexicon plus suffix rules.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::lexicon;
use crate::error::{Error, Result};
use crate::text::split_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Noun,
    Adj,
    Det,
    Verb,
    Other,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Noun => "NOUN",
            Tag::Adj => "ADJ",
            Tag::Det => "DET",
            Tag::Verb => "VERB",
            Tag::Other => "OTHER",
        })
    }
}

/// Anything that can assign a coarse tag to each token of a sentence.
pub trait Tagger {
    fn tag_tokens(&self, tokens: &[&str]) -> Vec<Tag>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosTaggedSentence {
    /// Surface tokens, case preserved.
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
}

/// Tags `sentence` with the built-in [`LexiconTagger`].
pub fn tag(sentence: &str) -> Result<PosTaggedSentence> {
    tag_with(&LexiconTagger, sentence)
}

pub fn tag_with<T: Tagger + ?Sized>(tagger: &T, sentence: &str) -> Result<PosTaggedSentence> {
    let tokens = split_words(sentence);
    if tokens.is_empty() {
        return Err(Error::EmptyInput("sentence to tag"));
    }
    let tags = tagger.tag_tokens(&tokens);
    debug_assert_eq!(tags.len(), tokens.len());
    Ok(PosTaggedSentence {
        tokens: tokens.into_iter().map(String::from).collect(),
        tags,
    })
}

/// Lexicon lookup, then inflection stripping, then suffix heuristics.
/// Unknown words are nouns.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexiconTagger;

fn lexicon() -> &'static HashMap<&'static str, Tag> {
    static LEXICON: OnceLock<HashMap<&'static str, Tag>> = OnceLock::new();
    LEXICON.get_or_init(|| {
        let mut map = HashMap::new();
        // earlier lists take precedence
        let lists: [(&[&str], Tag); 5] = [
            (lexicon::DETERMINERS, Tag::Det),
            (lexicon::OTHER, Tag::Other),
            (lexicon::NOUNS, Tag::Noun),
            (lexicon::ADJECTIVES, Tag::Adj),
            (lexicon::VERBS, Tag::Verb),
        ];
        for (words, tag) in lists {
            for &w in words {
                map.entry(w).or_insert(tag);
            }
        }
        map
    })
}

const NOUN_SUFFIXES: &[&str] = &[
    "tion", "sion", "ness", "ity", "ment", "ism", "ance", "ence", "ship", "hood", "ist",
];
const ADJ_SUFFIXES: &[&str] = &[
    "ous", "ful", "ive", "able", "ible", "less", "ical", "ic", "ish",
];

impl LexiconTagger {
    pub fn tag_word(&self, word: &str) -> Tag {
        let lower = word.to_lowercase();
        let lex = lexicon();
        if let Some(&t) = lex.get(lower.as_str()) {
            return t;
        }
        if lower.chars().all(|c| c.is_numeric()) {
            return Tag::Other;
        }
        // plural nouns and third-person verbs
        if lower.len() > 3 {
            let bases = [
                lower.strip_suffix("ies").map(|b| format!("{b}y")),
                lower.strip_suffix('s').map(String::from),
                lower.strip_suffix("es").map(String::from),
            ];
            for base in bases.into_iter().flatten() {
                match lex.get(base.as_str()) {
                    Some(Tag::Verb) => return Tag::Verb,
                    Some(Tag::Noun) => return Tag::Noun,
                    _ => {}
                }
            }
        }
        let n = lower.chars().count();
        if n > 4 && lower.ends_with("ly") {
            return Tag::Other;
        }
        if n > 5 && lower.ends_with("ing") {
            return Tag::Verb;
        }
        if n > 4 && lower.ends_with("ed") {
            return Tag::Verb;
        }
        let stripped = lower.strip_suffix('s').unwrap_or(&lower);
        if NOUN_SUFFIXES.iter().any(|s| stripped.ends_with(s)) {
            return Tag::Noun;
        }
        if ADJ_SUFFIXES.iter().any(|s| lower.ends_with(s)) {
            return Tag::Adj;
        }
        Tag::Noun
    }
}

impl Tagger for LexiconTagger {
    fn tag_tokens(&self, tokens: &[&str]) -> Vec<Tag> {
        tokens.iter().map(|t| self.tag_word(t)).collect()
    }
}
