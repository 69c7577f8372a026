//! Pattern catalog: scored chains grouped by canonical pattern.

use std::collections::{BTreeMap, HashMap};

use chainlab::records::GrcRecord;
use chainlab::scoring::ScoreRecord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub pattern: String,
    pub support_count: usize,
    pub mean_score: f64,
    /// Highest-scoring chains first.
    pub example_chain_ids: Vec<String>,
}

/// Sorted by mean score descending, then support descending, then pattern.
/// Chains without a score are left out.
pub fn catalog(grc: &[GrcRecord], scores: &[ScoreRecord], examples: usize) -> Vec<PatternRow> {
    let by_chain: HashMap<&str, f64> = scores.iter().map(|s| (s.chain_id.as_str(), s.score)).collect();
    let mut groups: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    let mut unscored = 0;
    for g in grc {
        match by_chain.get(g.chain_id.as_str()) {
            Some(&s) => groups.entry(g.pattern.as_str()).or_default().push((&g.chain_id, s)),
            None => unscored += 1,
        }
    }
    if unscored > 0 {
        log::warn!("{unscored} generalized chains have no score and were left out");
    }
    let mut rows: Vec<PatternRow> = groups
        .into_iter()
        .map(|(pattern, mut members)| {
            members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
            let mean = members.iter().map(|m| m.1).sum::<f64>() / members.len() as f64;
            PatternRow {
                pattern: pattern.to_string(),
                support_count: members.len(),
                mean_score: mean,
                example_chain_ids: members.iter().take(examples).map(|m| m.0.to_string()).collect(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean_score
            .total_cmp(&a.mean_score)
            .then(b.support_count.cmp(&a.support_count))
            .then(a.pattern.cmp(&b.pattern))
    });
    rows
}
