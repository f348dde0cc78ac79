//! `topic-forge`: index building, traversal, corpus operations, training,
//! serving and evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;

pub const DATA_DIR_ENV: &str = "TOPIC_FORGE_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "topic-forge", version, about = "Build topic-specific sentence datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleMode {
    Balanced,
    ByPrediction,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a binary link index from a `source<TAB>target` edge list.
    BuildIndex {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// List the articles linking to a title.
    Inlinks {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        title: String,
        #[arg(long)]
        json: bool,
    },
    /// Normalized Google Distance between two titles.
    Ngd {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        json: bool,
    },
    /// Collect articles related to a seed title.
    Traverse {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        seed: String,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 2)]
        iters: u32,
        /// TSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Draw a class-balanced sample of sentence records.
    Sample {
        #[arg(long, value_enum)]
        mode: SampleMode,
        #[arg(long = "in")]
        input: PathBuf,
        /// Records per class.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// by-prediction: JSONL records whose labels are predictions, matched by id.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// by-prediction: naive Bayes model used to predict each record.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve multi-rater labels: negative only when unanimous.
    Consensus {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label records with a keyword glossary.
    ClassifyKeywords {
        /// One or more glossary files, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        glossary: Vec<PathBuf>,
        /// Combine several glossaries into one.
        #[arg(long)]
        union: bool,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a naive Bayes model with optional labeled features.
    TrainNb {
        #[arg(long)]
        labeled: PathBuf,
        /// TSV `feature<TAB>class`.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        unlabeled: Option<PathBuf>,
        /// One EM pass over the unlabeled records.
        #[arg(long)]
        em: bool,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 50.0)]
        boost: f64,
        /// Unigram features only (default adds bigrams).
        #[arg(long)]
        unigrams: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the annotation service.
    AlServe {
        /// Corpus for the session named by --session-id, created on first start.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Held-out labeled records for live metrics.
        #[arg(long)]
        evaluation: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Event logs; defaults to `$TOPIC_FORGE_DATA_DIR/sessions`.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value = "default")]
        session_id: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        defer_retrain: bool,
    },
    /// Bootstrap accuracy, precision, recall and F1 of predictions.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Row label in the text table.
        #[arg(long, default_value = "Model")]
        name: String,
        #[arg(long)]
        json: bool,
    },
    /// Fleiss' kappa from per-item category counts.
    Kappa {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<clap::Error> for CliError {
    fn from(e: clap::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
