//! Two-hop candidate chain construction.
//!
//! 1. The top `k` facts for the query Q+A become first hops.
//! 2. For every first hop f1, up to `l` second hops are taken among facts that
//!    share a content word with (Q+A minus f1) and one with (f1 minus Q+A),
//!    ranked by BM25 against the second-hop query.
//! 3. Pairs that do not touch both Q and A are dropped.
//! 4. The best `m` pairs by summed BM25 score are returned.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::make_hypothesis;
use crate::index::{CorpusIndex, Fact};
use crate::text::{content_word_set, Analyzer};

/// A question with its correct answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub question_id: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<String>,
}

impl QaItem {
    pub fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() {
            return Err(Error::InvalidArgument(format!(
                "question {:?}: empty question",
                self.question_id
            )));
        }
        if self.answer.trim().is_empty() {
            return Err(Error::InvalidArgument(format!(
                "question {:?}: empty answer",
                self.question_id
            )));
        }
        Ok(())
    }

    fn query(&self) -> String {
        format!("{} {}", self.question, self.answer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCandidate {
    pub f1: Fact,
    pub f2: Fact,
    pub hypothesis: String,
    pub score_f1: f64,
    pub score_f2: f64,
    pub combined_score: f64,
}

impl ChainCandidate {
    pub fn new(f1: Fact, f2: Fact, hypothesis: String, score_f1: f64, score_f2: f64) -> Self {
        Self {
            f1,
            f2,
            hypothesis,
            score_f1,
            score_f2,
            combined_score: score_f1 + score_f2,
        }
    }
}

/// Query used to rank second-hop facts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondHopQuery {
    /// Q + A + f1 text.
    #[default]
    QuestionAnswerFact,
    /// f1 text alone.
    Fact,
}

/// How the final pair filter treats Q and A.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    /// The pair must share a content word with Q and one with A.
    #[default]
    QuestionAndAnswer,
    /// A content word from Q or A is enough.
    QuestionOrAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    #[serde(default)]
    pub second_hop: SecondHopQuery,
    #[serde(default)]
    pub overlap: OverlapMode,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            k: 20,
            l: 4,
            m: 10,
            second_hop: SecondHopQuery::default(),
            overlap: OverlapMode::default(),
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 || self.m == 0 {
            return Err(Error::InvalidArgument(format!(
                "retrieval parameters must be >= 1 (k={}, l={}, m={})",
                self.k, self.l, self.m
            )));
        }
        Ok(())
    }
}

/// True iff the pair shares a content word with the question and one with the
/// answer.
pub fn overlap_filter(pair: (&Fact, &Fact), qa: &QaItem) -> bool {
    passes_overlap(
        pair,
        &content_word_set(&qa.question),
        &content_word_set(&qa.answer),
        OverlapMode::QuestionAndAnswer,
    )
}

fn passes_overlap(
    (f1, f2): (&Fact, &Fact),
    question_words: &BTreeSet<String>,
    answer_words: &BTreeSet<String>,
    mode: OverlapMode,
) -> bool {
    let touches = |words: &BTreeSet<String>| {
        words
            .iter()
            .any(|w| f1.content_words.contains(w) || f2.content_words.contains(w))
    };
    match mode {
        OverlapMode::QuestionAndAnswer => touches(question_words) && touches(answer_words),
        OverlapMode::QuestionOrAnswer => touches(question_words) || touches(answer_words),
    }
}

pub fn retrieve_chains(
    index: &CorpusIndex,
    qa: &QaItem,
    params: &RetrievalParams,
) -> Result<Vec<ChainCandidate>> {
    params.validate()?;
    qa.validate()?;
    let analyzer: &Analyzer = index.analyzer();
    let hypothesis = make_hypothesis(qa).text;
    let qa_words = analyzer.content_words(&qa.query());
    let question_words = analyzer.content_words(&qa.question);
    let answer_words = analyzer.content_words(&qa.answer);

    let mut first_hops = index.ranked_docs(&qa_words);
    first_hops.truncate(params.k);

    let mut pairs: Vec<(u32, u32, f64, f64)> = Vec::new();
    for &(d1, s1) in &first_hops {
        let f1 = index.doc(d1);
        let missing: Vec<&String> = qa_words.difference(&f1.content_words).collect();
        let novel: Vec<&String> = f1.content_words.difference(&qa_words).collect();
        let with_missing = index.docs_with_any(missing);
        let with_novel = index.docs_with_any(novel);
        let eligible: BTreeSet<u32> = with_missing
            .intersection(&with_novel)
            .copied()
            .filter(|&d| d != d1)
            .collect();
        if eligible.is_empty() {
            continue;
        }

        let hop_query: BTreeSet<String> = match params.second_hop {
            SecondHopQuery::QuestionAnswerFact => {
                qa_words.union(&f1.content_words).cloned().collect()
            }
            SecondHopQuery::Fact => f1.content_words.clone(),
        };
        let scores = index.score_terms(&hop_query);
        let mut second_hops: Vec<(u32, f64)> = eligible
            .into_iter()
            .map(|d| (d, scores.get(&d).copied().unwrap_or(0.0)))
            .collect();
        second_hops.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        second_hops.truncate(params.l);

        for (d2, s2) in second_hops {
            let f2 = index.doc(d2);
            if passes_overlap((f1, f2), &question_words, &answer_words, params.overlap) {
                pairs.push((d1, d2, s1, s2));
            }
        }
    }

    // doc numbers follow fact id order, so comparing them compares ids
    pairs.sort_by(|a, b| {
        (b.2 + b.3)
            .total_cmp(&(a.2 + a.3))
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    pairs.truncate(params.m);
    Ok(pairs
        .into_iter()
        .map(|(d1, d2, s1, s2)| {
            ChainCandidate::new(
                index.doc(d1).clone(),
                index.doc(d2).clone(),
                hypothesis.clone(),
                s1,
                s2,
            )
        })
        .collect())
}
