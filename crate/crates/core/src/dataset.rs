//! Annotated chain datasets: per-worker judgments, majority aggregation and
//! split loading.
//!
//! The native format is one chain per line:
//!
//! ```text
//! {"question_id": "q1", "chain_id": "q1#0", "question": "...", "answer": "...",
//!  "f1": "...", "f2": "...", "hypothesis": "...", "score_f1": 1.0, "score_f2": 2.0,
//!  "judgments": ["yes", "yes", "no-unjustified"], "label": true, "split": "test",
//!  "gold": false}
//! ```
//!
//! Only `question_id`, `f1`/`f1_text`, `f2`/`f2_text` and one of `judgments` or
//! `label` are required. The release adapter in [`release`] maps the nested
//! per-question layout into these records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::hypothesis::make_hypothesis;
use crate::index::Fact;
use crate::records::{chain_id, for_each_jsonl_line};
use crate::retrieval::{ChainCandidate, QaItem};
use crate::text::Analyzer;

/// Published dataset sizes, used to warn on mismatching downloads.
pub mod expected {
    /// (total chains, valid chains) per split.
    pub const EQASC_TRAIN: (usize, usize) = (80449, 21551);
    pub const EQASC_DEV: (usize, usize) = (9190, 2186);
    pub const EQASC_TEST: (usize, usize) = (9141, 2210);
    pub const EOBQA_CHAINS: usize = 998;
    pub const EOBQA_VALID_FRACTION: f64 = 0.095;
    pub const PERTURBED_PAIRS: usize = 855;
    pub const EQASC_TEST_UPPER_BOUND: f64 = 0.76;
}

/// A single worker's judgment of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Judgment {
    Yes,
    /// A bare "no" without subcategory.
    No,
    NoF1Alone,
    NoF2Alone,
    NoEitherAlone,
    NoUnjustified,
    NoNonsense,
    Unsure,
}

impl Judgment {
    pub const ALL: [Judgment; 8] = [
        Judgment::Yes,
        Judgment::No,
        Judgment::NoF1Alone,
        Judgment::NoF2Alone,
        Judgment::NoEitherAlone,
        Judgment::NoUnjustified,
        Judgment::NoNonsense,
        Judgment::Unsure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Judgment::Yes => "yes",
            Judgment::No => "no",
            Judgment::NoF1Alone => "no-f1-alone",
            Judgment::NoF2Alone => "no-f2-alone",
            Judgment::NoEitherAlone => "no-either-alone",
            Judgment::NoUnjustified => "no-unjustified",
            Judgment::NoNonsense => "no-nonsense",
            Judgment::Unsure => "unsure",
        }
    }

    pub fn is_yes(self) -> bool {
        self == Judgment::Yes
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Judgment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let norm: String = s
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == '_' || c == ' ' { '-' } else { c })
            .collect();
        Ok(match norm.as_str() {
            "yes" | "valid" => Judgment::Yes,
            "no" | "invalid" => Judgment::No,
            "no-f1-alone" | "no-fact1-alone" => Judgment::NoF1Alone,
            "no-f2-alone" | "no-fact2-alone" => Judgment::NoF2Alone,
            "no-either-alone" => Judgment::NoEitherAlone,
            "no-unjustified" | "no-not-justified" => Judgment::NoUnjustified,
            "no-nonsense" | "no-does-not-make-sense" => Judgment::NoNonsense,
            u if u.starts_with("unsure") => Judgment::Unsure,
            _ => return Err(format!("unknown judgment {s:?}")),
        })
    }
}

impl From<Judgment> for String {
    fn from(j: Judgment) -> String {
        j.as_str().to_string()
    }
}

impl TryFrom<String> for Judgment {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

/// Valid iff a strict majority of judgments is "yes". Every other category,
/// unsure included, counts against.
pub fn aggregate_labels(judgments: &[Judgment]) -> Result<bool> {
    if judgments.is_empty() {
        return Err(Error::EmptyInput("judgment list"));
    }
    let yes = judgments.iter().filter(|j| j.is_yes()).count();
    Ok(2 * yes > judgments.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "validation" | "val" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedChain {
    pub question_id: String,
    pub chain_id: String,
    pub chain: ChainCandidate,
    pub judgments: Vec<Judgment>,
    pub label: bool,
    pub split: Split,
    /// The dataset's reference chain for the question.
    pub gold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitSummary {
    pub split: Split,
    pub total: usize,
    pub valid: usize,
    pub invalid: usize,
    pub questions: usize,
}

impl SplitSummary {
    pub fn of(split: Split, chains: &[AnnotatedChain]) -> Self {
        let valid = chains.iter().filter(|c| c.label).count();
        let questions: BTreeSet<&str> = chains.iter().map(|c| c.question_id.as_str()).collect();
        Self {
            split,
            total: chains.len(),
            valid,
            invalid: chains.len() - valid,
            questions: questions.len(),
        }
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.valid as f64 / self.total as f64
        }
    }

    /// Warnings for counts that differ from `(total, valid)`.
    pub fn check(&self, (total, valid): (usize, usize)) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.total != total {
            warnings.push(format!(
                "{} split: {} chains, expected {total}",
                self.split, self.total
            ));
        }
        if self.valid != valid {
            warnings.push(format!(
                "{} split: {} valid chains, expected {valid}",
                self.split, self.valid
            ));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        warnings
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Fail when a released label disagrees with the re-aggregated one.
    pub verify: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub chains: Vec<AnnotatedChain>,
    pub summary: SplitSummary,
}

/// Record as found on disk, before validation.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawChainRecord {
    pub question_id: String,
    #[serde(default)]
    pub chain_id: Option<String>,
    #[serde(default)]
    pub question: Option<String>,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(alias = "f1_text")]
    pub f1: String,
    #[serde(alias = "f2_text")]
    pub f2: String,
    #[serde(default)]
    pub f1_id: Option<String>,
    #[serde(default)]
    pub f2_id: Option<String>,
    #[serde(default)]
    pub hypothesis: Option<String>,
    #[serde(default)]
    pub score_f1: Option<f64>,
    #[serde(default)]
    pub score_f2: Option<f64>,
    #[serde(default)]
    pub judgments: Option<Vec<String>>,
    #[serde(default)]
    pub label: Option<Value>,
    #[serde(default)]
    pub split: Option<String>,
    #[serde(default)]
    pub gold: Option<bool>,
}

fn parse_released_label(value: &Value) -> std::result::Result<bool, String> {
    match value {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) => match n.as_i64() {
            Some(1) => Ok(true),
            Some(0) => Ok(false),
            _ => Err(format!("label {n} is not 0 or 1")),
        },
        Value::String(s) => s
            .parse::<Judgment>()
            .map(Judgment::is_yes)
            .map_err(|e| format!("label: {e}")),
        other => Err(format!("label {other} is not a boolean")),
    }
}

#[allow(clippy::too_many_arguments)]
fn chain_from_texts(
    f1: &str,
    f2: &str,
    f1_id: Option<&String>,
    f2_id: Option<&String>,
    hypothesis: String,
    score_f1: f64,
    score_f2: f64,
    analyzer: &Analyzer,
) -> ChainCandidate {
    let mut a = Fact::new(f1, analyzer);
    if let Some(id) = f1_id {
        a.id = id.clone();
    }
    let mut b = Fact::new(f2, analyzer);
    if let Some(id) = f2_id {
        b.id = id.clone();
    }
    ChainCandidate::new(a, b, hypothesis, score_f1, score_f2)
}

fn derive_hypothesis(
    hypothesis: Option<&String>,
    question: Option<&String>,
    answer: Option<&String>,
    question_id: &str,
) -> Option<String> {
    if let Some(h) = hypothesis.filter(|h| !h.trim().is_empty()) {
        return Some(h.clone());
    }
    let (q, a) = (question?, answer?);
    Some(
        make_hypothesis(&QaItem {
            question_id: question_id.to_string(),
            question: q.clone(),
            answer: a.clone(),
            options: Vec::new(),
            hypothesis: None,
        })
        .text,
    )
}

/// Validates raw records and keeps those belonging to `split`. Records
/// without a split tag are taken to belong to it.
pub fn annotate_records(
    records: Vec<(usize, RawChainRecord)>,
    split: Split,
    options: LoadOptions,
    path: &Path,
) -> Result<Vec<AnnotatedChain>> {
    let analyzer = Analyzer::english();
    let mut per_question: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (line, raw) in records {
        let record_split = match raw.split.as_deref() {
            None => split,
            Some(tag) => tag.parse::<Split>().map_err(|_| Error::UnknownSplit {
                path: path.display().to_string(),
                line,
                tag: tag.to_string(),
            })?,
        };
        let ordinal = per_question.entry(raw.question_id.clone()).or_insert(0);
        let this_ordinal = *ordinal;
        *ordinal += 1;
        if record_split != split {
            continue;
        }
        if raw.f1.trim().is_empty() || raw.f2.trim().is_empty() {
            return Err(Error::malformed(path, line, "empty fact text"));
        }

        let judgments = raw
            .judgments
            .as_deref()
            .unwrap_or_default()
            .iter()
            .map(|j| j.parse::<Judgment>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::malformed(path, line, e))?;
        let released = raw
            .label
            .as_ref()
            .map(parse_released_label)
            .transpose()
            .map_err(|e| Error::malformed(path, line, e))?;
        let label = if judgments.is_empty() {
            released.ok_or_else(|| {
                Error::malformed(path, line, "record has neither judgments nor label")
            })?
        } else {
            let aggregated = aggregate_labels(&judgments)?;
            if let (true, Some(released)) = (options.verify, released) {
                if released != aggregated {
                    return Err(Error::LabelMismatch {
                        path: path.display().to_string(),
                        line,
                        released,
                        aggregated,
                    });
                }
            }
            aggregated
        };

        let hypothesis = derive_hypothesis(
            raw.hypothesis.as_ref(),
            raw.question.as_ref(),
            raw.answer.as_ref(),
            &raw.question_id,
        )
        .ok_or_else(|| {
            Error::malformed(path, line, "no hypothesis and no question/answer to build one")
        })?;
        let chain = chain_from_texts(
            &raw.f1,
            &raw.f2,
            raw.f1_id.as_ref(),
            raw.f2_id.as_ref(),
            hypothesis,
            raw.score_f1.unwrap_or(0.0),
            raw.score_f2.unwrap_or(0.0),
            analyzer,
        );
        out.push(AnnotatedChain {
            chain_id: raw
                .chain_id
                .clone()
                .unwrap_or_else(|| chain_id(&raw.question_id, this_ordinal)),
            question_id: raw.question_id,
            chain,
            judgments,
            label,
            split,
            gold: raw.gold.unwrap_or(false),
        });
    }
    Ok(out)
}

/// Loads the chains of one split from a native line-delimited file.
pub fn load_split(path: &Path, split: Split) -> Result<LoadedSplit> {
    load_split_with(path, split, LoadOptions::default())
}

pub fn load_split_with(path: &Path, split: Split, options: LoadOptions) -> Result<LoadedSplit> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    for_each_jsonl_line(file, path, |line, value| {
        let record: RawChainRecord =
            serde_json::from_value(value).map_err(|e| Error::malformed(path, line, e.to_string()))?;
        raw.push((line, record));
        Ok(())
    })?;
    if raw.is_empty() {
        return Err(Error::NoRecords(path.display().to_string()));
    }
    let chains = annotate_records(raw, split, options, path)?;
    if chains.is_empty() {
        return Err(Error::NoRecords(format!("{} ({split} split)", path.display())));
    }
    let summary = SplitSummary::of(split, &chains);
    log::info!(
        "{}: {} {} chains, {} valid, {} invalid",
        path.display(),
        summary.total,
        split,
        summary.valid,
        summary.invalid
    );
    Ok(LoadedSplit { chains, summary })
}

/// Loads a split in either the native line format or the per-question
/// release layout, decided by the shape of the first record.
pub fn load_split_auto(path: &Path, split: Split) -> Result<LoadedSplit> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = raw.lines().map(str::trim).find(|l| !l.is_empty());
    let release_layout = match first {
        Some(l) if l.starts_with('[') => true,
        Some(l) => serde_json::from_str::<Value>(l)
            .map(|v| v.get("question").is_some_and(Value::is_object))
            .unwrap_or(false),
        None => false,
    };
    if release_layout {
        release::load_release_split(path, split)
    } else {
        load_split(path, split)
    }
}

/// An original valid chain and a crowd-edited variant that stays valid.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedPair {
    pub pair_id: String,
    pub question_id: String,
    pub original: ChainCandidate,
    pub edited: ChainCandidate,
}

#[derive(Debug, Deserialize)]
struct RawSide {
    #[serde(alias = "f1_text")]
    f1: String,
    #[serde(alias = "f2_text")]
    f2: String,
    #[serde(default)]
    hypothesis: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawPerturbed {
    question_id: String,
    #[serde(default)]
    pair_id: Option<String>,
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    answer: Option<String>,
    original: RawSide,
    edited: RawSide,
}

/// Loads perturbed pairs, one `{question_id, original, edited}` per line.
pub fn load_perturbed(path: &Path) -> Result<Vec<PerturbedPair>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let analyzer = Analyzer::english();
    let mut out = Vec::new();
    for_each_jsonl_line(file, path, |line, value| {
        let raw: RawPerturbed =
            serde_json::from_value(value).map_err(|e| Error::malformed(path, line, e.to_string()))?;
        let side = |s: &RawSide| -> Result<ChainCandidate> {
            let h = derive_hypothesis(
                s.hypothesis.as_ref(),
                raw.question.as_ref(),
                raw.answer.as_ref(),
                &raw.question_id,
            )
            .ok_or_else(|| Error::malformed(path, line, "missing hypothesis"))?;
            Ok(chain_from_texts(&s.f1, &s.f2, None, None, h, 0.0, 0.0, analyzer))
        };
        let original = side(&raw.original)?;
        let edited = side(&raw.edited)?;
        if original.f1.text == edited.f1.text
            && original.f2.text == edited.f2.text
            && original.hypothesis == edited.hypothesis
        {
            return Err(Error::malformed(path, line, "edited chain equals the original"));
        }
        out.push(PerturbedPair {
            pair_id: raw.pair_id.clone().unwrap_or_else(|| format!("p{}", out.len())),
            question_id: raw.question_id.clone(),
            original,
            edited,
        });
        Ok(())
    })?;
    if out.is_empty() {
        return Err(Error::NoRecords(path.display().to_string()));
    }
    if out.len() != expected::PERTURBED_PAIRS {
        log::warn!(
            "{}: {} perturbed pairs, expected {}",
            path.display(),
            out.len(),
            expected::PERTURBED_PAIRS
        );
    }
    Ok(out)
}

/// Fleiss' kappa over items that each carry the same number of judgments.
/// With `binary`, judgments are collapsed to yes / not-yes first. Returns
/// `None` when undefined (fewer than two raters, or no variation at all).
pub fn fleiss_kappa(items: &[Vec<Judgment>], binary: bool) -> Option<f64> {
    let raters = items.first()?.len();
    if raters < 2 || items.iter().any(|j| j.len() != raters) {
        return None;
    }
    let category = |j: Judgment| -> usize {
        if binary {
            usize::from(!j.is_yes())
        } else {
            Judgment::ALL.iter().position(|&c| c == j).unwrap_or(0)
        }
    };
    let k = if binary { 2 } else { Judgment::ALL.len() };
    let n = raters as f64;
    let mut totals = vec![0.0; k];
    let mut p_bar = 0.0;
    for item in items {
        let mut counts = vec![0.0; k];
        for &j in item {
            counts[category(j)] += 1.0;
        }
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
        p_bar += (counts.iter().map(|c| c * c).sum::<f64>() - n) / (n * (n - 1.0));
    }
    let items_n = items.len() as f64;
    p_bar /= items_n;
    let p_e: f64 = totals
        .iter()
        .map(|t| {
            let p = t / (items_n * n);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return None;
    }
    Some((p_bar - p_e) / (1.0 - p_e))
}

pub mod release {
    //! Adapter for the per-question release layout:
    //!
    //! ```text
    //! {"id": ..., "answerKey": "A", "question": {"stem": ..., "choices": [
    //!    {"label": "A", "text": ..., "chains": [
    //!       {"1": {"text": ...}, "2": {"text": ...}, "score": ...,
    //!        "turk_label": {"label": ...}}, ...]}, ...]}}
    //! ```
    //!
    //! Files may hold a JSON array of such objects or one per line. Only
    //! chains for the correct answer are kept. This is the only place that
    //! needs to change if the published layout differs.

    use std::fs;

    use super::*;

    fn text_of(v: &Value) -> Option<String> {
        match v {
            Value::String(s) => Some(s.clone()),
            Value::Object(o) => o.get("text").and_then(Value::as_str).map(String::from),
            _ => None,
        }
    }

    fn question_records(
        q: &Value,
        path: &Path,
        line: usize,
    ) -> Result<Vec<(usize, RawChainRecord)>> {
        let bad = |m: &str| Error::malformed(path, line, m.to_string());
        let qid = q
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing id"))?;
        let key = q.get("answerKey").and_then(Value::as_str);
        let question = q.get("question").ok_or_else(|| bad("missing question"))?;
        let stem = question
            .get("stem")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing question.stem"))?;
        let choices = question
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing question.choices"))?;
        let mut out = Vec::new();
        for choice in choices {
            if key.is_some() && choice.get("label").and_then(Value::as_str) != key {
                continue;
            }
            let answer = choice.get("text").and_then(Value::as_str).map(String::from);
            let Some(chains) = choice.get("chains").and_then(Value::as_array) else {
                continue;
            };
            for chain in chains {
                let f1 = chain.get("1").and_then(text_of).ok_or_else(|| bad("chain without fact 1"))?;
                let f2 = chain.get("2").and_then(text_of).ok_or_else(|| bad("chain without fact 2"))?;
                let label = chain
                    .get("turk_label")
                    .and_then(|t| t.get("label").cloned())
                    .or_else(|| chain.get("label").cloned());
                let score = chain.get("score").and_then(Value::as_f64);
                out.push((
                    line,
                    RawChainRecord {
                        question_id: qid.to_string(),
                        question: Some(stem.to_string()),
                        answer: answer.clone(),
                        f1,
                        f2,
                        score_f1: score,
                        label,
                        ..Default::default()
                    },
                ));
            }
        }
        Ok(out)
    }

    pub fn load_release_split(path: &Path, split: Split) -> Result<LoadedSplit> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        if raw.trim_start().starts_with('[') {
            let all: Vec<Value> = serde_json::from_str(&raw)
                .map_err(|e| Error::malformed(path, e.line(), e.to_string()))?;
            for (i, q) in all.iter().enumerate() {
                records.extend(question_records(q, path, i + 1)?);
            }
        } else {
            for_each_jsonl_line(raw.as_bytes(), path, |line, q| {
                records.extend(question_records(&q, path, line)?);
                Ok(())
            })?;
        }
        if records.is_empty() {
            return Err(Error::NoRecords(path.display().to_string()));
        }
        let chains = annotate_records(records, split, LoadOptions::default(), path)?;
        let summary = SplitSummary::of(split, &chains);
        Ok(LoadedSplit { chains, summary })
    }
}
