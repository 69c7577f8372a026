//! In-memory BM25 index over a fact corpus.
//!
//! ```text
//! score(D,Q) = Σ_{t ∈ Q} idf(t) · tf(t,D)·(k1+1) / (tf(t,D) + k1·(1 − b + b·|D|/avgdl))
//! idf(t)     = ln(1 + (N − df(t) + 0.5) / (df(t) + 0.5))
//! ```
//!
//! Query terms are treated as a set. Per-document sums are accumulated in
//! lexicographic term order so scores are reproducible bit for bit.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::{tokenize, Analyzer};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

pub const INDEX_MAGIC: &str = "CHAINLAB-INDEX";
pub const INDEX_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.json";

/// One corpus sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: String,
    pub text: String,
    /// Lowercased tokens, stopwords included.
    pub tokens: Vec<String>,
    /// Stemmed non-stopword tokens.
    pub content_words: BTreeSet<String>,
}

impl Fact {
    pub fn new(text: &str, analyzer: &Analyzer) -> Self {
        let text = text.trim().to_string();
        let tokens = tokenize(&text);
        let id = fact_id(&normalized_key(&tokens));
        let content_words = analyzer.content_words(&text);
        Self {
            id,
            text,
            tokens,
            content_words,
        }
    }
}

fn normalized_key(tokens: &[String]) -> String {
    tokens.join(" ")
}

/// Stable identifier derived from normalized text, so ids do not depend on
/// corpus order.
pub fn fact_id(normalized: &str) -> String {
    let digest = Sha256::digest(normalized.as_bytes());
    let mut id = String::with_capacity(21);
    id.push('f');
    for byte in &digest[..10] {
        id.push_str(&format!("{byte:02x}"));
    }
    id
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Counts reported by [`CorpusIndex::build`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub input_sentences: usize,
    pub duplicates: usize,
    /// Sentences with no indexable term.
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusIndex {
    analyzer: Analyzer,
    /// Sorted by id; a document number is a position in this vector.
    facts: Vec<Fact>,
    doc_len: Vec<u32>,
    avg_doc_len: f64,
    postings: HashMap<String, Vec<Posting>>,
}

/// Builds an index with the shipped analyzer.
pub fn build_index<I, S>(sentences: I) -> Result<CorpusIndex>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    CorpusIndex::build(sentences, Analyzer::english().clone()).map(|(index, _)| index)
}

impl CorpusIndex {
    pub fn build<I, S>(sentences: I, analyzer: Analyzer) -> Result<(Self, BuildStats)>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut stats = BuildStats::default();
        // normalized text -> smallest raw text seen, which keeps the result
        // independent of input order
        let mut unique: BTreeMap<String, String> = BTreeMap::new();
        for sentence in sentences {
            stats.input_sentences += 1;
            let raw = sentence.as_ref().trim();
            let tokens = tokenize(raw);
            if analyzer.terms(raw).is_empty() {
                stats.skipped += 1;
                continue;
            }
            let key = normalized_key(&tokens);
            match unique.get_mut(&key) {
                Some(existing) => {
                    stats.duplicates += 1;
                    if raw < existing.as_str() {
                        *existing = raw.to_string();
                    }
                }
                None => {
                    unique.insert(key, raw.to_string());
                }
            }
        }
        if stats.skipped > 0 {
            log::warn!("skipped {} sentences without indexable terms", stats.skipped);
        }
        if unique.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let mut facts: Vec<Fact> = unique
            .values()
            .map(|raw| Fact::new(raw, &analyzer))
            .collect();
        facts.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = facts.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::IndexFormat(format!(
                "fact id collision on {} between {:?} and {:?}",
                w[0].id, w[0].text, w[1].text
            )));
        }
        Ok((Self::from_sorted_facts(facts, analyzer), stats))
    }

    fn from_sorted_facts(facts: Vec<Fact>, analyzer: Analyzer) -> Self {
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(facts.len());
        for (doc, fact) in facts.iter().enumerate() {
            let terms = analyzer.terms(&fact.text);
            doc_len.push(terms.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for term in terms {
                *tf.entry(term).or_default() += 1;
            }
            for (term, tf) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: doc as u32,
                    tf,
                });
            }
        }
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_len = total as f64 / facts.len() as f64;
        Self {
            analyzer,
            facts,
            doc_len,
            avg_doc_len,
            postings,
        }
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, id: &str) -> Option<&Fact> {
        self.facts
            .binary_search_by(|f| f.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.facts[i])
    }

    pub fn doc_count(&self) -> usize {
        self.facts.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    /// Number of distinct facts containing `term` (a stemmed content word).
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.facts.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, doc: u32) -> f64 {
        let tf = f64::from(tf);
        let dl = f64::from(self.doc_len[doc as usize]);
        let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * dl / self.avg_doc_len);
        idf * tf * (BM25_K1 + 1.0) / (tf + norm)
    }

    /// BM25 scores of every document containing at least one of `terms`.
    pub(crate) fn score_terms(&self, terms: &BTreeSet<String>) -> HashMap<u32, f64> {
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for p in list {
                *scores.entry(p.doc).or_insert(0.0) += self.term_weight(idf, p.tf, p.doc);
            }
        }
        scores
    }

    /// Documents containing at least one of `terms`.
    pub(crate) fn docs_with_any<'a, I>(&self, terms: I) -> BTreeSet<u32>
    where
        I: IntoIterator<Item = &'a String>,
    {
        terms
            .into_iter()
            .flat_map(|t| self.postings(t).iter().map(|p| p.doc))
            .collect()
    }

    pub(crate) fn doc(&self, doc: u32) -> &Fact {
        &self.facts[doc as usize]
    }

    /// Scores the query terms against every document and returns them sorted by
    /// score descending, then fact id ascending.
    pub(crate) fn ranked_docs(&self, terms: &BTreeSet<String>) -> Vec<(u32, f64)> {
        let mut ranked: Vec<(u32, f64)> = self.score_terms(terms).into_iter().collect();
        // facts are stored in id order, so doc number order is id order
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }

    /// Top `k` facts for `query` by BM25.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<(&Fact, f64)>> {
        if k == 0 {
            return Err(Error::InvalidArgument("search k must be >= 1".into()));
        }
        let terms = self.analyzer.content_words(query);
        let mut ranked = self.ranked_docs(&terms);
        ranked.truncate(k);
        Ok(ranked
            .into_iter()
            .map(|(doc, score)| (self.doc(doc), score))
            .collect())
    }

    /// BM25 score of one fact for `query`; `None` if the id is unknown.
    pub fn score(&self, query: &str, id: &str) -> Option<f64> {
        let doc = self
            .facts
            .binary_search_by(|f| f.id.as_str().cmp(id))
            .ok()? as u32;
        let terms = self.analyzer.content_words(query);
        let mut total = 0.0;
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            if let Ok(i) = list.binary_search_by_key(&doc, |p| p.doc) {
                total += self.term_weight(self.idf(term), list[i].tf, doc);
            }
        }
        Some(total)
    }

    /// Writes the index into `dir`, which must exist.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(INDEX_FILE);
        let dump = IndexDump {
            magic: INDEX_MAGIC.to_string(),
            version: INDEX_VERSION,
            analyzer: self.analyzer.clone(),
            facts: self
                .facts
                .iter()
                .map(|f| StoredFact {
                    id: f.id.clone(),
                    text: f.text.clone(),
                })
                .collect(),
        };
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, &dump)
            .map_err(|e| Error::IndexFormat(format!("serialize: {e}")))?;
        out.write_all(b"\n")
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let dump: IndexDump = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::IndexFormat(format!("{}: {e}", path.display())))?;
        if dump.magic != INDEX_MAGIC {
            return Err(Error::IndexFormat(format!("bad magic {:?}", dump.magic)));
        }
        if dump.version != INDEX_VERSION {
            return Err(Error::IndexFormat(format!(
                "unsupported version {} (expected {INDEX_VERSION})",
                dump.version
            )));
        }
        if dump.facts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut facts = Vec::with_capacity(dump.facts.len());
        for stored in dump.facts {
            let fact = Fact::new(&stored.text, &dump.analyzer);
            if fact.id != stored.id {
                return Err(Error::IndexFormat(format!(
                    "fact {:?} does not match its text",
                    stored.id
                )));
            }
            facts.push(fact);
        }
        if !facts.windows(2).all(|w| w[0].id < w[1].id) {
            return Err(Error::IndexFormat("facts not sorted by id".into()));
        }
        Ok(Self::from_sorted_facts(facts, dump.analyzer))
    }

    /// True when `dir` already holds an index dump.
    pub fn exists(dir: &Path) -> bool {
        fs::metadata(dir.join(INDEX_FILE)).is_ok()
    }
}

#[derive(Serialize, Deserialize)]
struct StoredFact {
    id: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct IndexDump {
    magic: String,
    version: u32,
    analyzer: Analyzer,
    facts: Vec<StoredFact>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_document() {
        let index = build_index(["Sparks can start a forest fire."]).unwrap();
        assert_eq!(index.doc_count(), 1);
        assert_eq!(index.df("spark"), 1);
        assert_eq!(index.df("forest"), 1);
        assert_eq!(index.df("can"), 0);
    }

    #[test]
    fn duplicates_are_merged() {
        let (index, stats) = CorpusIndex::build(
            ["Sparks can start a forest fire.", "sparks can start a forest fire"],
            Analyzer::english().clone(),
        )
        .unwrap();
        assert_eq!(index.doc_count(), 1);
        assert_eq!(stats.duplicates, 1);
        // the smaller raw text wins regardless of order
        assert_eq!(index.facts()[0].text, "Sparks can start a forest fire.");
    }

    #[test]
    fn empty_corpus_errors() {
        let empty: [&str; 0] = [];
        assert!(matches!(build_index(empty), Err(Error::EmptyCorpus)));
        assert!(matches!(build_index(["the of", "  "]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn stopword_only_sentences_are_skipped() {
        let (index, stats) = CorpusIndex::build(
            ["It is what it is.", "Whales are mammals"],
            Analyzer::english().clone(),
        )
        .unwrap();
        assert_eq!(index.doc_count(), 1);
        assert_eq!(stats.skipped, 1);
    }

    #[test]
    fn unknown_query_term_returns_nothing() {
        let index = build_index(["Sparks can start a forest fire."]).unwrap();
        assert!(index.search("zzzz", 5).unwrap().is_empty());
        assert!(index.search("the of and", 5).unwrap().is_empty());
        assert!(index.search("fire", 0).is_err());
    }

    #[test]
    fn forest_fire_facts_are_found() {
        let index = build_index([
            "Static electricity can cause sparks",
            "Sparks can start a forest fire",
            "Whales are mammals",
        ])
        .unwrap();
        let hits = index.search("forest fire static electricity", 10).unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|(_, s)| *s > 0.0));
    }

    #[test]
    fn save_load_round_trip() {
        let index = build_index([
            "Static electricity can cause sparks",
            "Sparks can start a forest fire",
            "Whales are mammals",
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        index.save(dir.path()).unwrap();
        let loaded = CorpusIndex::load(dir.path()).unwrap();
        assert_eq!(loaded.facts(), index.facts());
        assert_eq!(loaded.avg_doc_len().to_bits(), index.avg_doc_len().to_bits());
        let a = index.search("sparks fire whales", 3).unwrap();
        let b = loaded.search("sparks fire whales", 3).unwrap();
        assert_eq!(a.len(), b.len());
        for ((fa, sa), (fb, sb)) in a.iter().zip(&b) {
            assert_eq!(fa.id, fb.id);
            assert_eq!(sa.to_bits(), sb.to_bits());
        }
    }

    #[test]
    fn load_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(INDEX_FILE),
            r#"{"magic":"NOPE","version":1,"analyzer":{"stopwords_version":"x","stopwords":[]},"facts":[]}"#,
        )
        .unwrap();
        assert!(matches!(CorpusIndex::load(dir.path()), Err(Error::IndexFormat(_))));
        fs::write(
            dir.path().join(INDEX_FILE),
            r#"{"magic":"CHAINLAB-INDEX","version":9,"analyzer":{"stopwords_version":"x","stopwords":[]},"facts":[]}"#,
        )
        .unwrap();
        assert!(matches!(CorpusIndex::load(dir.path()), Err(Error::IndexFormat(_))));
    }

    #[test]
    fn index_is_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<CorpusIndex>();
    }
}
