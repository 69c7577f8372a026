//! `chainlab` command-line entry point.
//!
//! Exit codes: 0 on success, 1 for usage or input errors, 2 for internal and
//! scorer failures.

mod commands;
mod config;
mod mine;

use std::path::PathBuf;
use std::process::ExitCode;

use chainlab::dataset::Split;
use chainlab::metrics::{Metric, ThresholdMode};
use chainlab::retrieval::{OverlapMode, RetrievalParams, SecondHopQuery};
use chainlab::scoring::{Representation, ScorerKind, ScorerSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "chainlab", version, about = "Retrieve, generalize, score and evaluate two-fact explanation chains")]
pub struct Cli {
    /// Worker threads for per-question work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Seed echoed into every output header.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a BM25 index from a corpus with one fact per line.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Index directory.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing index.
        #[arg(long)]
        force: bool,
    },
    /// Retrieve candidate chains for each question.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        /// Questions, one {question_id, question, answer, ...} per line.
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        retrieval: RetrievalArgs,
    },
    /// Generalize chains into templates with entity variables.
    Grc {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score chains with the retrieval baseline or an external scorer.
    Score {
        /// Chain records as written by `retrieve`.
        #[arg(long = "in", required_unless_present = "gold")]
        input: Option<PathBuf>,
        /// Score the chains of an annotated split instead.
        #[arg(long, conflicts_with = "input")]
        gold: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        scorer: ScorerArgs,
    },
    /// Rank each question's chains by score.
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate scores against gold labels.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[command(flatten)]
        eval: EvalArgs,
        /// Report file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score changes between original chains and their edited variants.
    Consistency {
        /// Original chain records; pairs with --edited line by line.
        #[arg(long, requires_all = ["edited", "scores_a", "scores_b"], required_unless_present = "pairs")]
        orig: Option<PathBuf>,
        #[arg(long)]
        edited: Option<PathBuf>,
        /// Scores of the original chains.
        #[arg(long)]
        scores_a: Option<PathBuf>,
        /// Scores of the edited chains.
        #[arg(long)]
        scores_b: Option<PathBuf>,
        /// Perturbed-pair file to score directly with --scorer.
        #[arg(long, conflicts_with = "orig")]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group scored chains by generalized pattern.
    Mine {
        #[arg(long)]
        grc: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Example chain ids kept per pattern.
        #[arg(long, default_value_t = 3)]
        examples: usize,
    },
    /// Retrieve, generalize, score, rank and (with --gold) evaluate.
    Pipeline {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        questions: PathBuf,
        /// Directory for chains, grc, scores, ranked and report files.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SecondHopArg {
    /// Q + A + f1.
    QaFact,
    /// f1 only.
    Fact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OverlapArg {
    /// The pair must touch both Q and A.
    And,
    /// The pair must touch Q or A.
    Or,
}

#[derive(Debug, Clone, Args)]
pub struct RetrievalArgs {
    /// First-hop facts per question.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Second-hop facts per first hop.
    #[arg(long, default_value_t = 4)]
    pub l: usize,
    /// Chains kept per question.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, value_enum, default_value = "qa-fact")]
    pub second_hop: SecondHopArg,
    #[arg(long, value_enum, default_value = "and")]
    pub overlap: OverlapArg,
}

impl RetrievalArgs {
    pub fn params(&self) -> RetrievalParams {
        RetrievalParams {
            k: self.k,
            l: self.l,
            m: self.m,
            second_hop: match self.second_hop {
                SecondHopArg::QaFact => SecondHopQuery::QuestionAnswerFact,
                SecondHopArg::Fact => SecondHopQuery::Fact,
            },
            overlap: match self.overlap {
                OverlapArg::And => OverlapMode::QuestionAndAnswer,
                OverlapArg::Or => OverlapMode::QuestionOrAnswer,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScorerArgs {
    /// retrieval | cmd:<argv> | http:<url>
    #[arg(long, default_value = "retrieval")]
    pub scorer: ScorerKind,
    /// Chain representation sent to external scorers.
    #[arg(long, default_value = "surface")]
    pub repr: Representation,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

impl ScorerArgs {
    pub fn spec(&self) -> ScorerSpec {
        ScorerSpec {
            timeout: std::time::Duration::from_millis(self.timeout_ms),
            batch_size: self.batch_size,
            ..ScorerSpec::new(self.scorer.clone(), self.repr)
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_delimiter = ',', default_value = "f1,auc,p1,ndcg")]
    pub metrics: Vec<Metric>,
    /// F1 decision threshold, or `auto` to tune on --dev-scores/--dev-gold.
    #[arg(long, default_value = "0.5")]
    pub threshold: ThresholdMode,
    #[arg(long, requires = "dev_gold")]
    pub dev_scores: Option<PathBuf>,
    #[arg(long, requires = "dev_scores")]
    pub dev_gold: Option<PathBuf>,
}

/// Bad invocation or unusable input; exits with 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<chainlab::Error>() {
            return if e.is_input_error() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
