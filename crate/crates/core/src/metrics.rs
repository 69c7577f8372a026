//! Classification metrics (F1, AUC-ROC), ranking metrics (P@1, NDCG),
//! perturbation consistency and retrieval upper bounds.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotatedChain, PerturbedPair};
use crate::error::{Error, Result};
use crate::retrieval::ChainCandidate;
use crate::scoring::{rank_chains, ScoreRecord};

/// Labels of one question's chains in descending score order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedExplanations {
    pub question_id: String,
    pub labels: Vec<bool>,
}

/// `NDCG = (1/Z) Σ_i y_i / log2(i + 1)` with `Z` the DCG of the ideal
/// ordering; 0 when no label is positive.
pub fn ndcg(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("ranked list"));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 {
        return Ok(0.0);
    }
    let gain = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y)
        .map(|(i, _)| gain(i))
        .sum();
    let ideal: f64 = (0..positives).map(gain).sum();
    Ok(dcg / ideal)
}

/// 1 when the top-ranked chain is valid.
pub fn p_at_1(labels: &[bool]) -> Result<f64> {
    labels
        .first()
        .map(|&y| if y { 1.0 } else { 0.0 })
        .ok_or(Error::EmptyInput("ranked list"))
}

pub fn mean_p_at_1(lists: &[RankedExplanations]) -> Result<f64> {
    mean(lists, |l| p_at_1(&l.labels))
}

pub fn mean_ndcg(lists: &[RankedExplanations]) -> Result<f64> {
    mean(lists, |l| ndcg(&l.labels))
}

fn mean(
    lists: &[RankedExplanations],
    metric: impl Fn(&RankedExplanations) -> Result<f64>,
) -> Result<f64> {
    if lists.is_empty() {
        return Err(Error::EmptyInput("question list"));
    }
    let mut total = 0.0;
    for l in lists {
        total += metric(l)?;
    }
    Ok(total / lists.len() as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(s_pos > s_neg) + 0.5 · P(s_pos = s_neg)`, computed from mid-ranks.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of 1-based mid-ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += mid_rank * pos_in_group as f64;
        i = j + 1;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// F1 of the positive class for predictions `score >= threshold`.
pub fn f1_positive(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 && tp + fneg == 0 {
        log::warn!("F1 undefined: no predicted and no actual positives; reporting 0");
        return Ok(0.0);
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Threshold among the observed scores that maximizes F1; ties go to the
/// larger threshold.
pub fn best_f1_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("score list"));
    }
    let mut candidates: Vec<f64> = scores.iter().copied().filter(|s| !s.is_nan()).collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for t in candidates {
        let f1 = f1_positive(scores, labels, t)?;
        if f1 > best.0 {
            best = (f1, t);
        }
    }
    Ok(best.1)
}

/// How the F1 decision threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum ThresholdMode {
    Fixed(f64),
    /// Tuned for F1 on a development split, then frozen.
    Auto,
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Fixed(0.5)
    }
}

impl FromStr for ThresholdMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(ThresholdMode::Auto);
        }
        s.parse::<f64>()
            .map(ThresholdMode::Fixed)
            .map_err(|_| format!("threshold must be 'auto' or a number, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    F1,
    Auc,
    P1,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::F1, Metric::Auc, Metric::P1, Metric::Ndcg];
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "f1" => Ok(Metric::F1),
            "auc" | "auc-roc" | "auc_roc" => Ok(Metric::Auc),
            "p1" | "p@1" => Ok(Metric::P1),
            "ndcg" => Ok(Metric::Ndcg),
            other => Err(format!("unknown metric {other:?} (f1|auc|p1|ndcg)")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::F1 => "f1",
            Metric::Auc => "auc",
            Metric::P1 => "p1",
            Metric::Ndcg => "ndcg",
        })
    }
}

/// A scored chain with its gold label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub question_id: String,
    pub chain_id: String,
    pub score: f64,
    pub label: bool,
}

/// Joins scores with gold labels on chain id. Every gold chain needs a
/// score; scores without a gold label are ignored.
pub fn join_labels(scores: &[ScoreRecord], gold: &[AnnotatedChain]) -> Result<Vec<LabeledScore>> {
    let by_id: HashMap<&str, &ScoreRecord> =
        scores.iter().map(|s| (s.chain_id.as_str(), s)).collect();
    let mut out = Vec::with_capacity(gold.len());
    for g in gold {
        let s = by_id.get(g.chain_id.as_str()).ok_or_else(|| {
            Error::InvalidArgument(format!("no score for gold chain {:?}", g.chain_id))
        })?;
        out.push(LabeledScore {
            question_id: g.question_id.clone(),
            chain_id: g.chain_id.clone(),
            score: s.score,
            label: g.label,
        });
    }
    if scores.len() > out.len() {
        log::warn!("{} scored chains have no gold label", scores.len() - out.len());
    }
    Ok(out)
}

/// Ranks each question's chains and returns their labels in rank order.
pub fn ranked_labels(scored: &[LabeledScore]) -> Result<Vec<RankedExplanations>> {
    let mut by_question: BTreeMap<&str, Vec<&LabeledScore>> = BTreeMap::new();
    for s in scored {
        by_question.entry(s.question_id.as_str()).or_default().push(s);
    }
    by_question
        .into_iter()
        .map(|(q, items)| {
            let records: Vec<ScoreRecord> = items
                .iter()
                .map(|s| ScoreRecord {
                    chain_id: s.chain_id.clone(),
                    question_id: q.to_string(),
                    score: s.score,
                    scorer: String::new(),
                })
                .collect();
            let labels: HashMap<&str, bool> =
                items.iter().map(|s| (s.chain_id.as_str(), s.label)).collect();
            let ranked = rank_chains(q, &records)?;
            Ok(RankedExplanations {
                question_id: q.to_string(),
                labels: ranked
                    .ranking
                    .iter()
                    .map(|e| labels[e.chain_id.as_str()])
                    .collect(),
            })
        })
        .collect()
}

/// Fraction of questions with at least one valid chain in their pool: the
/// best P@1 any scorer can reach.
pub fn upper_bound(lists: &[RankedExplanations]) -> f64 {
    if lists.is_empty() {
        return 0.0;
    }
    let covered = lists.iter().filter(|l| l.labels.iter().any(|&y| y)).count();
    covered as f64 / lists.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionEval {
    pub question_id: String,
    pub chains: usize,
    pub valid: usize,
    pub p_at_1: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub chains: usize,
    pub questions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_roc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_at_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ndcg: Option<f64>,
    pub upper_bound_p_at_1: f64,
    pub per_question: Vec<QuestionEval>,
}

/// Computes the requested metrics. `threshold` is the F1 decision threshold
/// already resolved (see [`resolve_threshold`]). AUC is reported as `None`
/// when the labels hold a single class.
pub fn evaluate(scored: &[LabeledScore], metrics: &[Metric], threshold: f64) -> Result<EvalReport> {
    if scored.is_empty() {
        return Err(Error::EmptyInput("scored chains"));
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = scored.iter().map(|s| s.label).collect();
    let lists = ranked_labels(scored)?;
    let wants = |m: Metric| metrics.contains(&m);

    let f1 = if wants(Metric::F1) {
        Some(f1_positive(&scores, &labels, threshold)?)
    } else {
        None
    };
    let auc_roc = if wants(Metric::Auc) {
        match auc_roc(&scores, &labels) {
            Ok(a) => Some(a),
            Err(Error::UndefinedAuc) => {
                log::warn!("AUC undefined: single-class labels");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let per_question = lists
        .iter()
        .map(|l| {
            Ok(QuestionEval {
                question_id: l.question_id.clone(),
                chains: l.labels.len(),
                valid: l.labels.iter().filter(|&&y| y).count(),
                p_at_1: p_at_1(&l.labels)?,
                ndcg: ndcg(&l.labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        chains: scored.len(),
        questions: lists.len(),
        f1,
        threshold: f1.map(|_| threshold),
        auc_roc,
        p_at_1: if wants(Metric::P1) { Some(mean_p_at_1(&lists)?) } else { None },
        ndcg: if wants(Metric::Ndcg) { Some(mean_ndcg(&lists)?) } else { None },
        upper_bound_p_at_1: upper_bound(&lists),
        per_question,
    })
}

/// Fixed thresholds pass through; `Auto` tunes on `dev`.
pub fn resolve_threshold(mode: ThresholdMode, dev: Option<&[LabeledScore]>) -> Result<f64> {
    match mode {
        ThresholdMode::Fixed(t) => Ok(t),
        ThresholdMode::Auto => {
            let dev = dev.ok_or_else(|| {
                Error::InvalidArgument("threshold auto needs development scores and labels".into())
            })?;
            let scores: Vec<f64> = dev.iter().map(|s| s.score).collect();
            let labels: Vec<bool> = dev.iter().map(|s| s.label).collect();
            best_f1_threshold(&scores, &labels)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower edge; the first bin holds exact zeros only.
    pub lower: f64,
    /// Inclusive upper edge.
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub pairs: usize,
    pub fraction_zero_change: f64,
    pub mean_abs_change: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Absolute score changes between originals and edits. Bins: exactly 0,
/// then (0, 0.1], (0.1, 0.2], ..., (0.9, 1.0], and one open bin above 1.
pub fn consistency(score_pairs: &[(f64, f64)]) -> Result<ConsistencyReport> {
    if score_pairs.is_empty() {
        return Err(Error::EmptyInput("perturbed pairs"));
    }
    let mut histogram = vec![HistogramBin {
        lower: 0.0,
        upper: 0.0,
        count: 0,
    }];
    for i in 0..10 {
        histogram.push(HistogramBin {
            lower: i as f64 / 10.0,
            upper: (i + 1) as f64 / 10.0,
            count: 0,
        });
    }
    histogram.push(HistogramBin {
        lower: 1.0,
        upper: f64::INFINITY,
        count: 0,
    });
    let mut zero = 0;
    let mut total = 0.0;
    for &(a, b) in score_pairs {
        let delta = (a - b).abs();
        total += delta;
        let bin = if delta == 0.0 {
            zero += 1;
            0
        } else if delta > 1.0 {
            11
        } else {
            // (k/10, (k+1)/10] -> bin k+1
            ((delta * 10.0).ceil() as usize).clamp(1, 10)
        };
        histogram[bin].count += 1;
    }
    let n = score_pairs.len() as f64;
    Ok(ConsistencyReport {
        pairs: score_pairs.len(),
        fraction_zero_change: zero as f64 / n,
        mean_abs_change: total / n,
        histogram,
    })
}

/// Looks up both members of each pair by id and reports consistency.
pub fn consistency_by_id(
    pair_ids: &[(String, String)],
    original_scores: &HashMap<String, f64>,
    edited_scores: &HashMap<String, f64>,
) -> Result<ConsistencyReport> {
    let mut pairs = Vec::with_capacity(pair_ids.len());
    for (orig, edit) in pair_ids {
        let a = original_scores
            .get(orig)
            .ok_or_else(|| Error::UnmatchedPair(format!("no score for original {orig:?}")))?;
        let b = edited_scores
            .get(edit)
            .ok_or_else(|| Error::UnmatchedPair(format!("no score for edited {edit:?}")))?;
        pairs.push((*a, *b));
    }
    consistency(&pairs)
}

/// Scores both sides of every perturbed pair with `score` and reports
/// consistency.
pub fn consistency_of_pairs<F>(pairs: &[PerturbedPair], mut score: F) -> Result<ConsistencyReport>
where
    F: FnMut(&ChainCandidate) -> Result<f64>,
{
    let mut deltas = Vec::with_capacity(pairs.len());
    for p in pairs {
        deltas.push((score(&p.original)?, score(&p.edited)?));
    }
    consistency(&deltas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldInjectionReport {
    pub questions: usize,
    pub skipped: usize,
    pub injected: usize,
    pub p_at_1: f64,
    pub upper_bound: f64,
}

/// Adds each question's gold chain to its candidate pool when the pool does
/// not already contain it (same pair of facts), rescores and recomputes P@1.
/// Questions without a gold chain are skipped.
pub fn gold_injection_eval<F>(
    pool: &[AnnotatedChain],
    gold: &HashMap<String, ChainCandidate>,
    mut score: F,
) -> Result<GoldInjectionReport>
where
    F: FnMut(&ChainCandidate) -> Result<f64>,
{
    let mut by_question: BTreeMap<&str, Vec<&AnnotatedChain>> = BTreeMap::new();
    for c in pool {
        by_question.entry(c.question_id.as_str()).or_default().push(c);
    }
    let mut scored = Vec::new();
    let (mut skipped, mut injected) = (0, 0);
    for (q, chains) in by_question {
        let Some(g) = gold.get(q) else {
            log::warn!("question {q:?} has no gold chain; skipped");
            skipped += 1;
            continue;
        };
        let present = chains
            .iter()
            .any(|c| c.chain.f1.id == g.f1.id && c.chain.f2.id == g.f2.id);
        for c in &chains {
            scored.push(LabeledScore {
                question_id: q.to_string(),
                chain_id: c.chain_id.clone(),
                score: score(&c.chain)?,
                label: c.label,
            });
        }
        if !present {
            injected += 1;
            scored.push(LabeledScore {
                question_id: q.to_string(),
                chain_id: format!("{q}#gold"),
                score: score(g)?,
                label: true,
            });
        }
    }
    if scored.is_empty() {
        return Err(Error::EmptyInput("questions with gold chains"));
    }
    let lists = ranked_labels(&scored)?;
    Ok(GoldInjectionReport {
        questions: lists.len(),
        skipped,
        injected,
        p_at_1: mean_p_at_1(&lists)?,
        upper_bound: upper_bound(&lists),
    })
}
