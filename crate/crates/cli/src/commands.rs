use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chainlab::dataset::{load_perturbed, load_split_auto, AnnotatedChain, Split};
use chainlab::delex::generalize_texts;
use chainlab::index::{CorpusIndex, Fact};
use chainlab::metrics::{
    consistency_by_id, evaluate, join_labels, resolve_threshold, LabeledScore, ThresholdMode,
};
use chainlab::records::{read_jsonl, ChainRecord, GrcRecord};
use chainlab::retrieval::{retrieve_chains, QaItem, RetrievalParams};
use chainlab::scoring::{
    rank_all, score_external, RankedChains, ScoreRecord, ScorerKind, ScorerSpec,
};
use chainlab::text::Analyzer;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::mine::catalog;
use crate::{Cli, Command, EvalArgs, UsageError};

pub const STOPWORDS_ENV: &str = "CHAINLAB_STOPWORDS";

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    let connections = cli.jobs.unwrap_or(1);
    match &cli.command {
        Command::Index { corpus, out, force } => cmd_index(seed, corpus, out, *force),
        Command::Retrieve {
            index,
            questions,
            out,
            retrieval,
        } => {
            let mut cfg = RunConfig::new("retrieve", seed);
            cfg.input("index", index)?;
            cfg.input("questions", questions)?;
            cfg.output(out)?;
            let params = retrieval.params();
            cfg.retrieval = Some(params);
            let index = load_index(index, &mut cfg)?;
            let chains = retrieve_all(&index, &read_jsonl(questions)?, &params)?;
            cfg.write_records(out, &chains)
        }
        Command::Grc { input, out } => {
            let mut cfg = RunConfig::new("grc", seed);
            cfg.input("chains", input)?;
            cfg.output(out)?;
            cfg.write_records(out, &generalize_all(&read_jsonl(input)?))
        }
        Command::Score {
            input,
            gold,
            split,
            out,
            scorer,
        } => {
            let mut cfg = RunConfig::new("score", seed);
            let records = match (input, gold) {
                (Some(path), _) => {
                    cfg.input("chains", path)?;
                    read_jsonl(path)?
                }
                (None, Some(path)) => {
                    cfg.input("gold", path)?;
                    cfg.option("split", split);
                    load_split_auto(path, *split)?
                        .chains
                        .iter()
                        .map(annotated_record)
                        .collect()
                }
                (None, None) => return Err(UsageError("--in or --gold is required".into()).into()),
            };
            cfg.output(out)?;
            let spec = scorer.spec();
            cfg.representation = Some(spec.representation);
            cfg.scorer = Some(spec.clone());
            let scores = score_records(&spec, &records, connections)?;
            cfg.write_records(out, &scores)
        }
        Command::Rank { input, out } => {
            let mut cfg = RunConfig::new("rank", seed);
            cfg.input("scores", input)?;
            cfg.output(out)?;
            let scores: Vec<ScoreRecord> = read_jsonl(input)?;
            cfg.write_records(out, &rank_all(&scores)?)
        }
        Command::Eval {
            scores,
            gold,
            split,
            eval,
            out,
        } => {
            let mut cfg = RunConfig::new("eval", seed);
            cfg.input("scores", scores)?;
            cfg.input("gold", gold)?;
            eval_options(&mut cfg, eval, *split)?;
            if let Some(out) = out {
                cfg.output(out)?;
            }
            let gold_chains = load_split_auto(gold, *split)?.chains;
            let labeled = join_labels(&read_jsonl(scores)?, &gold_chains)?;
            let threshold = threshold_for(eval)?;
            let report = evaluate(&labeled, &eval.metrics, threshold)?;
            cfg.write_report(out.as_ref(), &report)
        }
        Command::Consistency {
            orig,
            edited,
            scores_a,
            scores_b,
            pairs,
            scorer,
            out,
        } => {
            let mut cfg = RunConfig::new("consistency", seed);
            if let Some(out) = out {
                cfg.output(out)?;
            }
            let report = match (orig, edited, scores_a, scores_b, pairs) {
                (Some(orig), Some(edited), Some(a), Some(b), None) => {
                    cfg.input("orig", orig)?;
                    cfg.input("edited", edited)?;
                    cfg.input("scores_a", a)?;
                    cfg.input("scores_b", b)?;
                    consistency_from_files(orig, edited, a, b)?
                }
                (None, None, None, None, Some(pairs)) => {
                    cfg.input("pairs", pairs)?;
                    let spec = scorer.spec();
                    if spec.kind == ScorerKind::Retrieval {
                        return Err(UsageError(
                            "perturbed pairs carry no retrieval scores; use an external --scorer".into(),
                        )
                        .into());
                    }
                    cfg.representation = Some(spec.representation);
                    cfg.scorer = Some(spec.clone());
                    consistency_of_pairs(pairs, &spec, connections)?
                }
                _ => {
                    return Err(UsageError(
                        "give either --orig, --edited, --scores-a and --scores-b, or --pairs".into(),
                    )
                    .into())
                }
            };
            cfg.write_report(out.as_ref(), &report)
        }
        Command::Mine {
            grc,
            scores,
            out,
            examples,
        } => {
            let mut cfg = RunConfig::new("mine", seed);
            cfg.input("grc", grc)?;
            cfg.input("scores", scores)?;
            cfg.output(out)?;
            cfg.option("examples", examples);
            let rows = catalog(&read_jsonl(grc)?, &read_jsonl(scores)?, *examples);
            cfg.write_records(out, &rows)
        }
        Command::Pipeline {
            index,
            questions,
            out_dir,
            gold,
            split,
            retrieval,
            scorer,
            eval,
        } => {
            let mut cfg = RunConfig::new("pipeline", seed);
            cfg.input("index", index)?;
            cfg.input("questions", questions)?;
            if let Some(gold) = gold {
                cfg.input("gold", gold)?;
                eval_options(&mut cfg, eval, *split)?;
            }
            let params = retrieval.params();
            let spec = scorer.spec();
            cfg.retrieval = Some(params);
            cfg.representation = Some(spec.representation);
            cfg.scorer = Some(spec.clone());
            fs::create_dir_all(out_dir)
                .map_err(|e| chainlab::Error::io(out_dir, e))?;
            cfg.output(&out_dir.join("chains.jsonl"))?;
            cfg.output = Some(out_dir.display().to_string());
            let index = load_index(index, &mut cfg)?;
            let qa: Vec<QaItem> = read_jsonl(questions)?;

            let chains = retrieve_all(&index, &qa, &params)?;
            cfg.write_records(&out_dir.join("chains.jsonl"), &chains)?;
            cfg.write_records(&out_dir.join("grc.jsonl"), &generalize_all(&chains))?;
            let scores = score_records(&spec, &chains, connections)?;
            cfg.write_records(&out_dir.join("scores.jsonl"), &scores)?;
            let ranked: Vec<RankedChains> = rank_all(&scores)?;
            cfg.write_records(&out_dir.join("ranked.jsonl"), &ranked)?;
            log::info!(
                "{} questions, {} chains written to {}",
                qa.len(),
                chains.len(),
                out_dir.display()
            );
            if let Some(gold) = gold {
                let gold_chains = load_split_auto(gold, *split)?.chains;
                let labeled = label_retrieved(&chains, &scores, &gold_chains);
                if labeled.is_empty() {
                    return Err(UsageError("no retrieved chains to evaluate".into()).into());
                }
                let threshold = threshold_for(eval)?;
                let report = evaluate(&labeled, &eval.metrics, threshold)?;
                cfg.write_report(Some(&out_dir.join("report.json")), &report)?;
            }
            Ok(())
        }
    }
}

/// Stopword list from `CHAINLAB_STOPWORDS`, else the built-in list.
fn analyzer_from_env() -> Result<Analyzer> {
    match std::env::var_os(STOPWORDS_ENV) {
        Some(path) => {
            let path = PathBuf::from(path);
            Analyzer::from_stopword_file(&path)
                .with_context(|| format!("{STOPWORDS_ENV}={}", path.display()))
        }
        None => Ok(Analyzer::english().clone()),
    }
}

fn cmd_index(seed: u64, corpus: &Path, out: &Path, force: bool) -> Result<()> {
    let mut cfg = RunConfig::new("index", seed);
    cfg.input("corpus", corpus)?;
    if out.exists() && !out.is_dir() {
        return Err(UsageError(format!("{} exists and is not a directory", out.display())).into());
    }
    if CorpusIndex::exists(out) && !force {
        return Err(UsageError(format!(
            "{} already holds an index; pass --force to rebuild",
            out.display()
        ))
        .into());
    }
    let analyzer = analyzer_from_env()?;
    cfg.stopwords = Some(analyzer.stopwords_version().to_string());
    let text = fs::read_to_string(corpus).map_err(|e| chainlab::Error::io(corpus, e))?;
    let (index, stats) = CorpusIndex::build(text.lines(), analyzer)?;
    fs::create_dir_all(out).map_err(|e| chainlab::Error::io(out, e))?;
    index.save(out)?;
    cfg.output = Some(out.display().to_string());
    cfg.write_report(Some(&out.join("build.json")), &stats)?;
    log::info!(
        "indexed {} facts ({} duplicates, {} skipped)",
        index.doc_count(),
        stats.duplicates,
        stats.skipped
    );
    Ok(())
}

fn load_index(dir: &Path, cfg: &mut RunConfig) -> Result<CorpusIndex> {
    let index = CorpusIndex::load(dir)?;
    let version = index.analyzer().stopwords_version().to_string();
    if std::env::var_os(STOPWORDS_ENV).is_some() {
        let wanted = analyzer_from_env()?;
        if wanted.stopwords_version() != version {
            log::warn!(
                "{STOPWORDS_ENV} names {}, but the index was built with {version}; using the index's list",
                wanted.stopwords_version()
            );
        }
    }
    cfg.stopwords = Some(version);
    Ok(index)
}

fn retrieve_all(index: &CorpusIndex, questions: &[QaItem], params: &RetrievalParams) -> Result<Vec<ChainRecord>> {
    params.validate()?;
    let mut seen = BTreeSet::new();
    if let Some(dup) = questions.iter().find(|q| !seen.insert(q.question_id.as_str())) {
        return Err(UsageError(format!("duplicate question id {:?}", dup.question_id)).into());
    }
    let per_question: Vec<Vec<ChainRecord>> = questions
        .par_iter()
        .map(|qa| {
            let chains = retrieve_chains(index, qa, params)
                .with_context(|| format!("question {:?}", qa.question_id))?;
            if chains.is_empty() {
                log::info!("question {:?}: no candidate chains", qa.question_id);
            }
            Ok(chains
                .iter()
                .enumerate()
                .map(|(rank, c)| ChainRecord::from_candidate(&qa.question_id, rank, c))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_question.into_iter().flatten().collect())
}

fn generalize_all(chains: &[ChainRecord]) -> Vec<GrcRecord> {
    chains
        .par_iter()
        .map(|c| GrcRecord::new(&c.chain_id, &generalize_texts(&c.f1_text, &c.f2_text, &c.hypothesis)))
        .collect()
}

fn annotated_record(c: &AnnotatedChain) -> ChainRecord {
    ChainRecord {
        question_id: c.question_id.clone(),
        chain_id: c.chain_id.clone(),
        f1_id: c.chain.f1.id.clone(),
        f1_text: c.chain.f1.text.clone(),
        f2_id: c.chain.f2.id.clone(),
        f2_text: c.chain.f2.text.clone(),
        hypothesis: c.chain.hypothesis.clone(),
        score_f1: c.chain.score_f1,
        score_f2: c.chain.score_f2,
        combined_score: c.chain.combined_score,
    }
}

/// Scores records; external scorers get `connections` independent
/// connections, each serving a contiguous slice.
fn score_records(spec: &ScorerSpec, records: &[ChainRecord], connections: usize) -> Result<Vec<ScoreRecord>> {
    let mut ids = BTreeSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(r.chain_id.as_str())) {
        return Err(UsageError(format!("duplicate chain id {:?}", dup.chain_id)).into());
    }
    if spec.kind == ScorerKind::Retrieval || connections <= 1 || records.len() < 2 {
        return Ok(score_external(spec, records)?);
    }
    let size = records.len().div_ceil(connections);
    let parts: Vec<Vec<ScoreRecord>> = records
        .par_chunks(size)
        .map(|chunk| score_external(spec, chunk))
        .collect::<chainlab::Result<_>>()?;
    Ok(parts.concat())
}

fn eval_options(cfg: &mut RunConfig, eval: &EvalArgs, split: Split) -> Result<()> {
    cfg.option("metrics", &eval.metrics);
    cfg.option("threshold", eval.threshold);
    cfg.option("split", split);
    if let (Some(s), Some(g)) = (&eval.dev_scores, &eval.dev_gold) {
        cfg.input("dev_scores", s)?;
        cfg.input("dev_gold", g)?;
    }
    if eval.threshold == ThresholdMode::Auto && eval.dev_scores.is_none() {
        return Err(UsageError("--threshold auto needs --dev-scores and --dev-gold".into()).into());
    }
    Ok(())
}

fn threshold_for(eval: &EvalArgs) -> Result<f64> {
    let dev: Option<Vec<LabeledScore>> = match (&eval.dev_scores, &eval.dev_gold) {
        (Some(s), Some(g)) => {
            let gold = load_split_auto(g, Split::Dev)?.chains;
            Some(join_labels(&read_jsonl(s)?, &gold)?)
        }
        _ => None,
    };
    let threshold = resolve_threshold(eval.threshold, dev.as_deref())?;
    if eval.threshold == ThresholdMode::Auto {
        log::info!("tuned F1 threshold {threshold} on the dev split");
    }
    Ok(threshold)
}

/// Labels retrieved chains from annotated ones with the same question and
/// the same pair of facts. Unannotated chains count as invalid.
fn label_retrieved(chains: &[ChainRecord], scores: &[ScoreRecord], gold: &[AnnotatedChain]) -> Vec<LabeledScore> {
    let analyzer = Analyzer::english();
    let key = |q: &str, f1: &str, f2: &str| {
        (
            q.to_string(),
            Fact::new(f1, analyzer).id,
            Fact::new(f2, analyzer).id,
        )
    };
    let labels: HashMap<(String, String, String), bool> = gold
        .iter()
        .map(|g| (key(&g.question_id, &g.chain.f1.text, &g.chain.f2.text), g.label))
        .collect();
    let by_chain: HashMap<&str, f64> = scores.iter().map(|s| (s.chain_id.as_str(), s.score)).collect();
    let mut unannotated = 0;
    let labeled: Vec<LabeledScore> = chains
        .iter()
        .filter_map(|c| {
            let score = *by_chain.get(c.chain_id.as_str())?;
            let label = labels.get(&key(&c.question_id, &c.f1_text, &c.f2_text)).copied();
            if label.is_none() {
                unannotated += 1;
            }
            Some(LabeledScore {
                question_id: c.question_id.clone(),
                chain_id: c.chain_id.clone(),
                score,
                label: label.unwrap_or(false),
            })
        })
        .collect();
    if unannotated > 0 {
        log::warn!("{unannotated} retrieved chains have no annotation and count as invalid");
    }
    labeled
}

fn consistency_from_files(
    orig: &Path,
    edited: &Path,
    scores_a: &Path,
    scores_b: &Path,
) -> Result<chainlab::metrics::ConsistencyReport> {
    let orig: Vec<ChainRecord> = read_jsonl(orig)?;
    let edited: Vec<ChainRecord> = read_jsonl(edited)?;
    if orig.len() != edited.len() {
        return Err(UsageError(format!(
            "{} original chains but {} edited chains",
            orig.len(),
            edited.len()
        ))
        .into());
    }
    let scores = |path: &Path| -> Result<HashMap<String, f64>> {
        let records: Vec<ScoreRecord> = read_jsonl(path)?;
        Ok(records.into_iter().map(|r| (r.chain_id, r.score)).collect())
    };
    let pairs: Vec<(String, String)> = orig
        .into_iter()
        .zip(edited)
        .map(|(o, e)| (o.chain_id, e.chain_id))
        .collect();
    Ok(consistency_by_id(&pairs, &scores(scores_a)?, &scores(scores_b)?)?)
}

fn consistency_of_pairs(
    path: &Path,
    spec: &ScorerSpec,
    connections: usize,
) -> Result<chainlab::metrics::ConsistencyReport> {
    let pairs = load_perturbed(path)?;
    let side = |id: String, qid: &str, c: &chainlab::retrieval::ChainCandidate| ChainRecord {
        question_id: qid.to_string(),
        chain_id: id,
        f1_id: c.f1.id.clone(),
        f1_text: c.f1.text.clone(),
        f2_id: c.f2.id.clone(),
        f2_text: c.f2.text.clone(),
        hypothesis: c.hypothesis.clone(),
        score_f1: c.score_f1,
        score_f2: c.score_f2,
        combined_score: c.combined_score,
    };
    let mut records = Vec::with_capacity(pairs.len() * 2);
    let mut ids = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let (a, b) = (format!("{}/orig", p.pair_id), format!("{}/edit", p.pair_id));
        records.push(side(a.clone(), &p.question_id, &p.original));
        records.push(side(b.clone(), &p.question_id, &p.edited));
        ids.push((a, b));
    }
    let scores: HashMap<String, f64> = score_records(spec, &records, connections)?
        .into_iter()
        .map(|s| (s.chain_id, s.score))
        .collect();
    Ok(consistency_by_id(&ids, &scores, &scores)?)
}
