//! Generalized reasoning chains: repeated noun phrases in (f1, f2, H) are
//! replaced by variables so chains that differ only in their entities share a
//! single template.

mod lexicon;
pub mod tagger;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::retrieval::ChainCandidate;
use crate::text::stem;

pub use tagger::{tag, tag_with, LexiconTagger, PosTaggedSentence, Tag, Tagger};

/// One token of a template: a literal word or a variable index (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TemplateToken {
    Word(String),
    Var(u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Template(pub Vec<TemplateToken>);

impl Template {
    pub fn variables(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().filter_map(|t| match t {
            TemplateToken::Var(v) => Some(*v),
            TemplateToken::Word(_) => None,
        })
    }

    fn render(&self, name: impl Fn(u32) -> String, lowercase: bool) -> String {
        self.0
            .iter()
            .map(|t| match t {
                TemplateToken::Word(w) if lowercase => w.to_lowercase(),
                TemplateToken::Word(w) => w.clone(),
                TemplateToken::Var(v) => name(*v),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Renders variables as `V1`, `V2`, ...
impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(|v| format!("V{v}"), false))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub variable: String,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralizedChain {
    pub template_f1: Template,
    pub template_f2: Template,
    pub template_h: Template,
    /// Indexed by variable number minus one.
    pub bindings: Vec<String>,
}

impl GeneralizedChain {
    pub fn variable_count(&self) -> usize {
        self.bindings.len()
    }

    pub fn templates(&self) -> [&Template; 3] {
        [&self.template_f1, &self.template_f2, &self.template_h]
    }

    pub fn named_bindings(&self) -> Vec<Binding> {
        self.bindings
            .iter()
            .enumerate()
            .map(|(i, phrase)| Binding {
                variable: format!("V{}", i + 1),
                phrase: phrase.clone(),
            })
            .collect()
    }

    /// Templates with every variable replaced by its bound phrase.
    pub fn instantiate(&self) -> [Vec<String>; 3] {
        self.templates().map(|t| {
            t.0.iter()
                .flat_map(|tok| match tok {
                    TemplateToken::Word(w) => vec![w.clone()],
                    TemplateToken::Var(v) => self.bindings[*v as usize - 1]
                        .split(' ')
                        .map(String::from)
                        .collect(),
                })
                .collect()
        })
    }

    /// Variable names by first occurrence across f1, f2, H.
    fn canonical_names(&self) -> BTreeMap<u32, String> {
        let mut names = BTreeMap::new();
        for v in self.templates().into_iter().flat_map(Template::variables) {
            let next = names.len();
            names.entry(v).or_insert_with(|| variable_name(next));
        }
        names
    }

    /// The three templates with canonically named variables, as sent to
    /// scorers in GRC mode.
    pub fn canonical_sentences(&self) -> [String; 3] {
        let names = self.canonical_names();
        self.templates()
            .map(|t| t.render(|v| names[&v].clone(), true))
    }
}

/// X, Y, Z, W, then V5, V6, ...
fn variable_name(position: usize) -> String {
    match position {
        0 => "X".into(),
        1 => "Y".into(),
        2 => "Z".into(),
        3 => "W".into(),
        n => format!("V{}", n + 1),
    }
}

/// `T1 AND T2 -> TH` with variables renamed by first occurrence and words
/// lowercased. Alpha-equivalent chains render identically.
pub fn canonical_pattern(grc: &GeneralizedChain) -> String {
    let [f1, f2, h] = grc.canonical_sentences();
    format!("{f1} AND {f2} -> {h}")
}

/// A token span `[start, end)` inside sentence `sentence`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Span {
    sentence: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone)]
struct Entity {
    occurrences: Vec<Span>,
}

struct Analyzed {
    tokens: Vec<String>,
    tags: Vec<Tag>,
    keys: Vec<String>,
    /// Maximal NOUN runs as `[start, end)`.
    runs: Vec<(usize, usize)>,
}

impl Analyzed {
    fn new(sentence: PosTaggedSentence) -> Self {
        let keys = sentence
            .tokens
            .iter()
            .map(|t| stem(&t.to_lowercase()))
            .collect();
        let mut runs = Vec::new();
        let mut i = 0;
        while i < sentence.tags.len() {
            if sentence.tags[i] == Tag::Noun {
                let start = i;
                while i < sentence.tags.len() && sentence.tags[i] == Tag::Noun {
                    i += 1;
                }
                runs.push((start, i));
            } else {
                i += 1;
            }
        }
        Self {
            tokens: sentence.tokens,
            tags: sentence.tags,
            keys,
            runs,
        }
    }

    /// Start of the `(DET?)(ADJ*)` prefix ending right before `start`.
    fn modifier_start(&self, start: usize) -> usize {
        let mut m = start;
        while m > 0 && self.tags[m - 1] == Tag::Adj {
            m -= 1;
        }
        if m > 0 && self.tags[m - 1] == Tag::Det {
            m -= 1;
        }
        m
    }

    fn surface(&self, span: Span) -> String {
        self.tokens[span.start..span.end].join(" ")
    }
}

/// Finds noun phrases whose stemmed noun sequence occurs in at least two of
/// the sentences. Longer sequences are claimed first; within a sentence
/// matches are taken left to right without overlap. A preceding determiner
/// and adjectives are absorbed when they match at every occurrence.
fn shared_entities(sentences: &[Analyzed]) -> Vec<Entity> {
    let mut used: Vec<Vec<bool>> = sentences
        .iter()
        .map(|s| vec![false; s.tokens.len()])
        .collect();
    let max_len = sentences
        .iter()
        .flat_map(|s| s.runs.iter().map(|(a, b)| b - a))
        .max()
        .unwrap_or(0);

    let mut entities: Vec<(Vec<String>, Vec<Span>)> = Vec::new();
    for len in (1..=max_len).rev() {
        // key -> first position, in first-seen order
        let mut keys: Vec<Vec<String>> = Vec::new();
        let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
        for s in sentences {
            for &(a, b) in &s.runs {
                for start in a..=b.saturating_sub(len) {
                    if start + len > b {
                        break;
                    }
                    let key = s.keys[start..start + len].to_vec();
                    if seen.insert(key.clone()) {
                        keys.push(key);
                    }
                }
            }
        }
        for key in keys {
            let mut spans = Vec::new();
            for (si, s) in sentences.iter().enumerate() {
                let mut taken = vec![false; s.tokens.len()];
                for &(a, b) in &s.runs {
                    let mut start = a;
                    while start + len <= b {
                        let window = start..start + len;
                        if s.keys[window.clone()] == key[..]
                            && window.clone().all(|i| !used[si][i] && !taken[i])
                        {
                            window.for_each(|i| taken[i] = true);
                            spans.push(Span {
                                sentence: si,
                                start,
                                end: start + len,
                            });
                            start += len;
                        } else {
                            start += 1;
                        }
                    }
                }
            }
            let distinct: BTreeSet<usize> = spans.iter().map(|s| s.sentence).collect();
            if distinct.len() >= 2 {
                for sp in &spans {
                    (sp.start..sp.end).for_each(|i| used[sp.sentence][i] = true);
                }
                entities.push((key, spans));
            }
        }
    }

    let mut out: Vec<Entity> = entities
        .into_iter()
        .map(|(_, spans)| absorb_modifiers(sentences, spans))
        .map(|mut occurrences| {
            occurrences.sort();
            Entity { occurrences }
        })
        .collect();
    out.sort_by_key(|e| e.occurrences[0]);
    out
}

fn absorb_modifiers(sentences: &[Analyzed], spans: Vec<Span>) -> Vec<Span> {
    let at_run_start = spans.iter().all(|sp| {
        sentences[sp.sentence]
            .runs
            .iter()
            .any(|&(a, _)| a == sp.start)
    });
    if !at_run_start {
        return spans;
    }
    let modifiers: Vec<Vec<String>> = spans
        .iter()
        .map(|sp| {
            let s = &sentences[sp.sentence];
            s.keys[s.modifier_start(sp.start)..sp.start].to_vec()
        })
        .collect();
    // longest common suffix of the modifier sequences
    let shortest = modifiers.iter().map(Vec::len).min().unwrap_or(0);
    let mut common = 0;
    while common < shortest {
        let probe = &modifiers[0][modifiers[0].len() - 1 - common];
        if modifiers
            .iter()
            .all(|m| &m[m.len() - 1 - common] == probe)
        {
            common += 1;
        } else {
            break;
        }
    }
    spans
        .into_iter()
        .map(|sp| Span {
            start: sp.start - common,
            ..sp
        })
        .collect()
}

/// Delexicalizer parameterized over the tagger.
#[derive(Debug, Clone, Default)]
pub struct Delexicalizer<T = LexiconTagger> {
    tagger: T,
}

impl<T: Tagger> Delexicalizer<T> {
    pub fn new(tagger: T) -> Self {
        Self { tagger }
    }

    fn analyze(&self, sentences: &[&str]) -> Vec<Analyzed> {
        sentences
            .iter()
            .map(|s| {
                // empty sentences simply contribute nothing
                tag_with(&self.tagger, s).unwrap_or(PosTaggedSentence {
                    tokens: Vec::new(),
                    tags: Vec::new(),
                })
            })
            .map(Analyzed::new)
            .collect()
    }

    /// Surface form (first occurrence) of each shared noun phrase, in
    /// first-occurrence order.
    pub fn detect_shared_entities(&self, sentences: &[&str]) -> Vec<String> {
        let analyzed = self.analyze(sentences);
        shared_entities(&analyzed)
            .iter()
            .map(|e| {
                let first = e.occurrences[0];
                analyzed[first.sentence].surface(first)
            })
            .collect()
    }

    pub fn generalize_texts(&self, f1: &str, f2: &str, h: &str) -> GeneralizedChain {
        let analyzed = self.analyze(&[f1, f2, h]);
        let entities = shared_entities(&analyzed);

        let mut var_at: Vec<BTreeMap<usize, (usize, u32)>> = vec![BTreeMap::new(); 3];
        let mut bindings = Vec::with_capacity(entities.len());
        for (i, e) in entities.iter().enumerate() {
            let var = i as u32 + 1;
            let first = e.occurrences[0];
            bindings.push(analyzed[first.sentence].surface(first));
            for sp in &e.occurrences {
                var_at[sp.sentence].insert(sp.start, (sp.end, var));
            }
        }

        let mut templates = analyzed.iter().zip(&var_at).map(|(s, vars)| {
            let mut out = Vec::new();
            let mut i = 0;
            while i < s.tokens.len() {
                if let Some(&(end, var)) = vars.get(&i) {
                    out.push(TemplateToken::Var(var));
                    i = end;
                } else {
                    out.push(TemplateToken::Word(s.tokens[i].clone()));
                    i += 1;
                }
            }
            Template(out)
        });
        GeneralizedChain {
            template_f1: templates.next().unwrap_or_default(),
            template_f2: templates.next().unwrap_or_default(),
            template_h: templates.next().unwrap_or_default(),
            bindings,
        }
    }

    pub fn generalize(&self, chain: &ChainCandidate) -> GeneralizedChain {
        self.generalize_texts(&chain.f1.text, &chain.f2.text, &chain.hypothesis)
    }
}

/// Shared noun phrases with the built-in tagger.
pub fn detect_shared_entities(sentences: &[&str]) -> Vec<String> {
    Delexicalizer::<LexiconTagger>::default().detect_shared_entities(sentences)
}

pub fn generalize(chain: &ChainCandidate) -> GeneralizedChain {
    Delexicalizer::<LexiconTagger>::default().generalize(chain)
}

pub fn generalize_texts(f1: &str, f2: &str, h: &str) -> GeneralizedChain {
    Delexicalizer::<LexiconTagger>::default().generalize_texts(f1, f2, h)
}

/// Checks a tagged sentence is non-empty; exposed for callers that bring
/// their own tagger output.
pub fn validate_tagged(sentence: &PosTaggedSentence) -> Result<()> {
    if sentence.tokens.is_empty() || sentence.tokens.len() != sentence.tags.len() {
        return Err(crate::error::Error::EmptyInput("tagged sentence"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    const F1: &str = "Static electricity can cause sparks";
    const F2: &str = "Sparks can start a forest fire";
    const H: &str = "Static electricity can cause a forest fire.";

    #[test]
    fn forest_fire_chain() {
        let grc = generalize_texts(F1, F2, H);
        assert_eq!(grc.template_f1.to_string(), "V1 can cause V2");
        assert_eq!(grc.template_f2.to_string(), "V2 can start V3");
        assert_eq!(grc.template_h.to_string(), "V1 can cause V3");
        assert_eq!(
            grc.bindings,
            vec!["Static electricity", "sparks", "a forest fire"]
        );
        assert_eq!(
            canonical_pattern(&grc),
            "X can cause Y AND Y can start Z -> X can cause Z"
        );
    }

    #[test]
    fn blue_whale_detection() {
        let found =
            detect_shared_entities(&["the blue whale is a mammal", "the blue whale breathes air"]);
        assert_eq!(found, vec!["the blue whale"]);
    }

    #[test]
    fn differing_modifiers_keep_only_noun_core() {
        let found = detect_shared_entities(&["the blue whale is big", "a grey whale swims"]);
        assert_eq!(found, vec!["whale"]);
    }

    #[test]
    fn plural_singular_stem_match() {
        let found = detect_shared_entities(&["amphibians are predators", "a predator eats"]);
        assert_eq!(found, vec!["predators"]);
    }

    #[test]
    fn nothing_shared() {
        assert!(detect_shared_entities(&["whales swim", "birds fly", "rocks erode"]).is_empty());
        let grc = generalize_texts("Whales swim", "Birds fly", "Rocks erode");
        assert_eq!(grc.variable_count(), 0);
        assert_eq!(grc.template_f1.to_string(), "Whales swim");
        assert_eq!(
            canonical_pattern(&grc),
            "whales swim AND birds fly -> rocks erode"
        );
    }

    #[test]
    fn repeat_within_one_sentence_is_not_a_variable() {
        let grc = generalize_texts("Water and water vapor", "Birds fly", "Rocks erode");
        assert_eq!(grc.variable_count(), 0);
    }

    #[test]
    fn all_occurrences_in_a_sentence_are_replaced() {
        let grc = generalize_texts("Heat makes heat", "Heat rises", "Birds fly");
        assert_eq!(grc.template_f1.to_string(), "V1 makes V1");
        assert_eq!(grc.template_f2.to_string(), "V1 rises");
    }

    #[test]
    fn longest_match_wins() {
        // "forest fire" is shared by f2 and H, so the lone "fire" in f1 is
        // left alone once those occurrences are claimed
        let grc = generalize_texts("Fire is hot", "Sparks start a forest fire", "a forest fire burns");
        assert_eq!(grc.bindings, vec!["a forest fire"]);
        assert_eq!(grc.template_f1.to_string(), "Fire is hot");
    }

    #[test]
    fn canonical_pattern_ignores_internal_numbering() {
        let grc = generalize_texts(F1, F2, H);
        let swap = |t: &Template| {
            Template(
                t.0.iter()
                    .map(|tok| match tok {
                        TemplateToken::Var(1) => TemplateToken::Var(3),
                        TemplateToken::Var(3) => TemplateToken::Var(1),
                        other => other.clone(),
                    })
                    .collect(),
            )
        };
        let permuted = GeneralizedChain {
            template_f1: swap(&grc.template_f1),
            template_f2: swap(&grc.template_f2),
            template_h: swap(&grc.template_h),
            bindings: vec![
                grc.bindings[2].clone(),
                grc.bindings[1].clone(),
                grc.bindings[0].clone(),
            ],
        };
        assert_eq!(canonical_pattern(&permuted), canonical_pattern(&grc));
    }

    #[test]
    fn round_trip_up_to_stemming() {
        let chains = [
            (F1, F2, H),
            ("Amphibians are important predators", "A predator eats other animals", "Amphibians eat other animals"),
            ("Rivers erode the rocks they flow over", "soil is formed by rocks eroding", "soil is formed by rivers flowing over rocks"),
        ];
        for (f1, f2, h) in chains {
            let grc = generalize_texts(f1, f2, h);
            for (inst, orig) in grc.instantiate().iter().zip([f1, f2, h]) {
                let a: Vec<String> = inst.iter().map(|w| stem(&w.to_lowercase())).collect();
                let b: Vec<String> = tokenize(orig).iter().map(|w| stem(w)).collect();
                assert_eq!(a, b, "{orig}");
            }
        }
    }

    #[test]
    fn stemming_conflates_organ_and_organism() {
        // Known limitation: Porter maps both words to "organ", so these
        // unrelated nouns become one variable.
        assert_eq!(stem("organism"), stem("organic"));
        let grc = generalize_texts("Plants are organisms", "Plants have organs", "Birds fly");
        assert_eq!(grc.variable_count(), 2);
        assert_eq!(grc.template_f1.to_string(), "V1 are V2");
        assert_eq!(grc.template_f2.to_string(), "V1 have V2");
    }

    #[test]
    fn generalize_is_deterministic() {
        let a = generalize_texts(F1, F2, H);
        let b = generalize_texts(F1, F2, H);
        assert_eq!(a, b);
    }
}
