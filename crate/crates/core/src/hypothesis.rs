//! Declarative hypothesis for a question/answer pair.

use serde::{Deserialize, Serialize};

use crate::retrieval::QaItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisSource {
    Supplied,
    Appended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub source: HypothesisSource,
}

/// Uses the supplied hypothesis when there is one, otherwise appends the
/// answer to the question with its trailing question mark removed.
pub fn make_hypothesis(qa: &QaItem) -> Hypothesis {
    if let Some(h) = qa.hypothesis.as_deref().filter(|h| !h.trim().is_empty()) {
        return Hypothesis {
            text: h.to_string(),
            source: HypothesisSource::Supplied,
        };
    }
    let question = qa.question.trim();
    let question = question.strip_suffix('?').unwrap_or(question).trim_end();
    Hypothesis {
        text: format!("{question} {}", qa.answer.trim()),
        source: HypothesisSource::Appended,
    }
}
