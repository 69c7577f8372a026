//! Chain scorers and per-question ranking.

mod external;
pub mod protocol;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::delex::generalize_texts;
use crate::error::{Error, Result};
use crate::records::ChainRecord;
use crate::retrieval::ChainCandidate;

pub use external::{HttpScorer, SubprocessScorer};
pub use protocol::{ScoreRequest, ScoreResponse, PROTOCOL_VERSION};

/// What scorers see of a chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// The original sentences and hypothesis.
    #[default]
    Surface,
    /// The canonical generalized templates.
    Grc,
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "surface" => Ok(Representation::Surface),
            "grc" => Ok(Representation::Grc),
            other => Err(format!("unknown representation {other:?} (surface|grc)")),
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Surface => "surface",
            Representation::Grc => "grc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub chain_id: String,
    pub question_id: String,
    pub score: f64,
    pub scorer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScorerKind {
    Retrieval,
    ExternalSubprocess { argv: Vec<String> },
    ExternalHttp { url: String },
}

impl FromStr for ScorerKind {
    type Err = String;

    /// `retrieval`, `cmd:<argv>` (whitespace separated) or `http:<url>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "retrieval" {
            return Ok(ScorerKind::Retrieval);
        }
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err("cmd: scorer needs a command".into());
            }
            return Ok(ScorerKind::ExternalSubprocess { argv });
        }
        if let Some(rest) = s.strip_prefix("http:") {
            // accept both http:<url> and a bare http://host form
            let url = if rest.starts_with("//") {
                format!("http:{rest}")
            } else {
                rest.to_string()
            };
            return Ok(ScorerKind::ExternalHttp { url });
        }
        Err(format!("unknown scorer {s:?} (retrieval|cmd:<argv>|http:<url>)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub batch_size: usize,
    pub representation: Representation,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl ScorerSpec {
    pub fn new(kind: ScorerKind, representation: Representation) -> Self {
        Self {
            kind,
            timeout: Duration::from_secs(30),
            batch_size: 32,
            representation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(Error::InvalidArgument("scorer timeout must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("scorer batch size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ScorerKind::Retrieval => "retrieval".into(),
            ScorerKind::ExternalSubprocess { argv } => {
                format!("{}/cmd:{}", self.representation, argv.join(" "))
            }
            ScorerKind::ExternalHttp { url } => format!("{}/{url}", self.representation),
        }
    }
}

/// The retrieval baseline: the chain's summed BM25 score.
pub fn score_retrieval(chain: &ChainCandidate) -> f64 {
    chain.score_f1 + chain.score_f2
}

/// Builds the request for one chain in the chosen representation.
pub fn build_request(
    id: &str,
    f1: &str,
    f2: &str,
    h: &str,
    representation: Representation,
) -> ScoreRequest {
    match representation {
        Representation::Surface => ScoreRequest {
            id: id.to_string(),
            f1: f1.to_string(),
            f2: f2.to_string(),
            h: h.to_string(),
        },
        Representation::Grc => {
            let [f1, f2, h] = generalize_texts(f1, f2, h).canonical_sentences();
            ScoreRequest {
                id: id.to_string(),
                f1,
                f2,
                h,
            }
        }
    }
}

pub fn request_for_record(record: &ChainRecord, representation: Representation) -> ScoreRequest {
    build_request(
        &record.chain_id,
        &record.f1_text,
        &record.f2_text,
        &record.hypothesis,
        representation,
    )
}

/// A scorer that maps request batches to probabilities.
pub trait ChainScorer {
    fn name(&self) -> String;

    /// One score in `[0, 1]` per request, in request order.
    fn score_batch(&mut self, batch: &[ScoreRequest]) -> Result<Vec<f64>>;
}

/// Any closure over requests is a scorer; handy for in-process models and
/// test doubles.
pub struct FnScorer<F> {
    name: String,
    f: F,
}

impl<F: FnMut(&ScoreRequest) -> f64> FnScorer<F> {
    pub fn new(name: &str, f: F) -> Self {
        Self {
            name: name.to_string(),
            f,
        }
    }
}

impl<F: FnMut(&ScoreRequest) -> f64> ChainScorer for FnScorer<F> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn score_batch(&mut self, batch: &[ScoreRequest]) -> Result<Vec<f64>> {
        let scores: Vec<f64> = batch.iter().map(|r| (self.f)(r)).collect();
        for (r, s) in batch.iter().zip(&scores) {
            check_probability(&r.id, *s)?;
        }
        Ok(scores)
    }
}

pub(crate) fn check_probability(chain_id: &str, score: f64) -> Result<()> {
    if score.is_finite() && (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(Error::Protocol {
            chain_id: chain_id.to_string(),
            message: format!("score {score} outside [0, 1]"),
        })
    }
}

/// Scores `records` with `scorer` in batches of `batch_size`.
pub fn score_with(
    scorer: &mut dyn ChainScorer,
    records: &[ChainRecord],
    representation: Representation,
    batch_size: usize,
) -> Result<Vec<ScoreRecord>> {
    let mut ids = BTreeSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(r.chain_id.as_str())) {
        return Err(Error::InvalidArgument(format!(
            "duplicate chain id {:?}",
            dup.chain_id
        )));
    }
    let name = scorer.name();
    let mut out = Vec::with_capacity(records.len());
    for chunk in records.chunks(batch_size.max(1)) {
        let batch: Vec<ScoreRequest> = chunk
            .iter()
            .map(|r| request_for_record(r, representation))
            .collect();
        let scores = scorer.score_batch(&batch)?;
        if scores.len() != chunk.len() {
            return Err(Error::Protocol {
                chain_id: chunk[0].chain_id.clone(),
                message: format!("{} scores for {} chains", scores.len(), chunk.len()),
            });
        }
        out.extend(chunk.iter().zip(scores).map(|(r, score)| ScoreRecord {
            chain_id: r.chain_id.clone(),
            question_id: r.question_id.clone(),
            score,
            scorer: name.clone(),
        }));
    }
    Ok(out)
}

/// Scores chains with the external scorer described by `spec`.
pub fn score_external(spec: &ScorerSpec, records: &[ChainRecord]) -> Result<Vec<ScoreRecord>> {
    spec.validate()?;
    match &spec.kind {
        ScorerKind::Retrieval => Ok(score_records_retrieval(records)),
        ScorerKind::ExternalSubprocess { argv } => {
            let mut scorer = SubprocessScorer::new(argv.clone(), spec.timeout, spec.representation);
            score_with(&mut scorer, records, spec.representation, spec.batch_size)
        }
        ScorerKind::ExternalHttp { url } => {
            let mut scorer = HttpScorer::new(url, spec.timeout, spec.representation);
            score_with(&mut scorer, records, spec.representation, spec.batch_size)
        }
    }
}

pub fn score_records_retrieval(records: &[ChainRecord]) -> Vec<ScoreRecord> {
    records
        .iter()
        .map(|r| ScoreRecord {
            chain_id: r.chain_id.clone(),
            question_id: r.question_id.clone(),
            score: r.score_f1 + r.score_f2,
            scorer: "retrieval".into(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub chain_id: String,
    pub score: f64,
    /// 1-based.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedChains {
    pub question_id: String,
    pub ranking: Vec<RankedEntry>,
}

/// Orders a question's chains by score descending, ties by chain id.
pub fn rank_chains(question_id: &str, records: &[ScoreRecord]) -> Result<RankedChains> {
    let mut mine: Vec<&ScoreRecord> = records
        .iter()
        .filter(|r| r.question_id == question_id)
        .collect();
    if mine.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no scores for question {question_id:?}"
        )));
    }
    if let Some(bad) = mine.iter().find(|r| r.score.is_nan()) {
        return Err(Error::InvalidArgument(format!(
            "NaN score for chain {:?}",
            bad.chain_id
        )));
    }
    mine.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.chain_id.cmp(&b.chain_id)));
    Ok(RankedChains {
        question_id: question_id.to_string(),
        ranking: mine
            .into_iter()
            .enumerate()
            .map(|(i, r)| RankedEntry {
                chain_id: r.chain_id.clone(),
                score: r.score,
                position: i + 1,
            })
            .collect(),
    })
}

/// Ranks every question present in `records`, in question id order.
pub fn rank_all(records: &[ScoreRecord]) -> Result<Vec<RankedChains>> {
    let mut by_question: BTreeMap<&str, Vec<ScoreRecord>> = BTreeMap::new();
    for r in records {
        by_question
            .entry(r.question_id.as_str())
            .or_default()
            .push(r.clone());
    }
    by_question
        .into_iter()
        .map(|(q, rs)| rank_chains(q, &rs))
        .collect()
}
