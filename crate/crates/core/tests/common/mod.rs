//! Independent reference implementations and fixtures shared by the
//! integration tests. The oracles work from raw fact texts and never touch
//! the index's postings.

#![allow(dead_code)]

use std::collections::BTreeSet;

use chainlab::index::{CorpusIndex, Fact};
use chainlab::retrieval::{OverlapMode, QaItem, RetrievalParams, SecondHopQuery};
use chainlab::text::Analyzer;

const K1: f64 = 1.2;
const B: f64 = 0.75;

/// Textbook BM25 over a list of documents given as term sequences.
pub struct Bm25Oracle {
    docs: Vec<Vec<String>>,
    avg_len: f64,
}

impl Bm25Oracle {
    pub fn new(facts: &[Fact], analyzer: &Analyzer) -> Self {
        let docs: Vec<Vec<String>> = facts.iter().map(|f| analyzer.terms(&f.text)).collect();
        let avg_len = docs.iter().map(Vec::len).sum::<usize>() as f64 / docs.len() as f64;
        Self { docs, avg_len }
    }

    pub fn score(&self, query: &BTreeSet<String>, doc: usize) -> f64 {
        let n = self.docs.len() as f64;
        let d = &self.docs[doc];
        let mut total = 0.0;
        for term in query {
            let tf = d.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = self.docs.iter().filter(|x| x.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            total += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * d.len() as f64 / self.avg_len));
        }
        total
    }

    pub fn matches(&self, query: &BTreeSet<String>, doc: usize) -> bool {
        query.iter().any(|t| self.docs[doc].contains(t))
    }
}

/// Expected chain as (f1 text, f2 text, f1 score, f2 score).
pub type OracleChain = (String, String, f64, f64);

/// Enumerates every ordered fact pair and applies the retrieval steps
/// literally: top-k first hops, top-l eligible second hops, the overlap
/// filter, then the top-m pairs by summed score.
pub fn brute_force_chains(index: &CorpusIndex, qa: &QaItem, params: &RetrievalParams) -> Vec<OracleChain> {
    let analyzer = index.analyzer();
    let facts = index.facts();
    let oracle = Bm25Oracle::new(facts, analyzer);
    let qa_words = analyzer.content_words(&format!("{} {}", qa.question, qa.answer));
    let q_words = analyzer.content_words(&qa.question);
    let a_words = analyzer.content_words(&qa.answer);

    let by_score_then_id = |a: &(usize, f64), b: &(usize, f64)| {
        b.1.partial_cmp(&a.1).unwrap().then(facts[a.0].id.cmp(&facts[b.0].id))
    };

    let mut first: Vec<(usize, f64)> = (0..facts.len())
        .filter(|&i| oracle.matches(&qa_words, i))
        .map(|i| (i, oracle.score(&qa_words, i)))
        .collect();
    first.sort_by(by_score_then_id);
    first.truncate(params.k);

    let mut pairs: Vec<(usize, usize, f64, f64)> = Vec::new();
    for &(i, s1) in &first {
        let w1 = &facts[i].content_words;
        let missing: BTreeSet<&String> = qa_words.difference(w1).collect();
        let novel: BTreeSet<&String> = w1.difference(&qa_words).collect();
        let query: BTreeSet<String> = match params.second_hop {
            SecondHopQuery::QuestionAnswerFact => qa_words.union(w1).cloned().collect(),
            SecondHopQuery::Fact => w1.clone(),
        };
        let mut second: Vec<(usize, f64)> = (0..facts.len())
            .filter(|&j| j != i)
            .filter(|&j| {
                let w2 = &facts[j].content_words;
                missing.iter().any(|w| w2.contains(*w)) && novel.iter().any(|w| w2.contains(*w))
            })
            .map(|j| (j, oracle.score(&query, j)))
            .collect();
        second.sort_by(by_score_then_id);
        second.truncate(params.l);
        for (j, s2) in second {
            let union: BTreeSet<&String> =
                facts[i].content_words.union(&facts[j].content_words).collect();
            let hits_q = q_words.iter().any(|w| union.contains(w));
            let hits_a = a_words.iter().any(|w| union.contains(w));
            let keep = match params.overlap {
                OverlapMode::QuestionAndAnswer => hits_q && hits_a,
                OverlapMode::QuestionOrAnswer => hits_q || hits_a,
            };
            if keep {
                pairs.push((i, j, s1, s2));
            }
        }
    }
    pairs.sort_by(|a, b| {
        (b.2 + b.3)
            .partial_cmp(&(a.2 + a.3))
            .unwrap()
            .then(facts[a.0].id.cmp(&facts[b.0].id))
            .then(facts[a.1].id.cmp(&facts[b.1].id))
    });
    pairs.truncate(params.m);
    pairs
        .into_iter()
        .map(|(i, j, s1, s2)| (facts[i].text.clone(), facts[j].text.clone(), s1, s2))
        .collect()
}

pub fn forest_fire_question() -> QaItem {
    QaItem {
        question_id: "forest".into(),
        question: "What can cause a forest fire?".into(),
        answer: "static electricity".into(),
        options: vec![],
        hypothesis: None,
    }
}

pub const FOREST_FIRE_F1: &str = "Static electricity can cause sparks";
pub const FOREST_FIRE_F2: &str = "Sparks can start a forest fire";

/// Ten facts small enough to enumerate pairs by hand.
pub const TEN_FACTS: [&str; 10] = [
    FOREST_FIRE_F1,
    FOREST_FIRE_F2,
    "Lightning can cause a forest fire",
    "Friction can produce static electricity",
    "Rubbing a balloon builds static charge",
    "Sparks are small pieces of burning material",
    "Dry leaves help a fire spread",
    "Forest animals flee from smoke",
    "Electricity flows through copper wire",
    "Rain can put out a fire",
];

/// The two forest-fire facts among 48 distractors, several of which share
/// vocabulary with the question or the answer.
pub fn fifty_fact_corpus() -> Vec<&'static str> {
    let mut facts = TEN_FACTS.to_vec();
    facts.extend([
        "A forest is a large area covered with trees",
        "Fire needs oxygen fuel and heat",
        "Static cling happens when clothes rub together",
        "Electricity is the flow of electrons",
        "A campfire can start a forest fire if left unattended",
        "Smoke from a fire can harm the lungs",
        "Power lines carry electricity to homes",
        "Thunderstorms produce lightning and heavy rain",
        "Firefighters use water to control a fire",
        "Trees produce oxygen through photosynthesis",
        "Sparks fly when metal strikes flint",
        "Dry grass burns quickly",
        "Electric eels generate electricity to stun prey",
        "A battery stores chemical energy",
        "Heat can cause metal to expand",
        "Wind can spread a fire across a hillside",
        "Static electricity builds up on a wool sweater",
        "Magnets attract iron objects",
        "Rivers erode the rocks they flow over",
        "Plants need sunlight to grow",
        "Volcanoes release ash and gas",
        "Birds build nests in trees",
        "Frogs lay eggs in ponds",
        "The moon orbits the earth",
        "Ice melts when heated",
        "Copper is a good conductor of heat",
        "Glass is made from sand",
        "Whales are mammals that live in the ocean",
        "Fungi decompose dead wood",
        "Soil contains minerals and organic matter",
        "Earthquakes shake the ground",
        "Gravity pulls objects toward the earth",
        "Sound travels as a wave",
        "Clouds are made of water droplets",
        "Snow forms when water vapor freezes",
        "Salt dissolves in water",
        "Steam is water in the gas state",
        "Seeds can travel on the wind",
        "A thermometer measures temperature",
        "Predators hunt prey for food",
    ]);
    assert_eq!(facts.len(), 50);
    facts
}

pub fn default_params() -> RetrievalParams {
    RetrievalParams::default()
}

pub fn large_params() -> RetrievalParams {
    RetrievalParams {
        k: 1000,
        l: 1000,
        m: 1000,
        ..RetrievalParams::default()
    }
}
