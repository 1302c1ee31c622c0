//! The `predtext` command: corpus generation, training, evaluation, the
//! qualitative studies, the HTTP service and an interactive typing mode.

pub mod commands;
pub mod config;
pub mod http;
pub mod interactive;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{ConfigArgs, EvalOptions, RunConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "predtext",
    version,
    about = "Word prediction and completion with KB-conditioned, numerically grounded LSTMs"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Dev,
    #[default]
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.jsonl",
            Split::Dev => "dev.jsonl",
            Split::Test => "test.jsonl",
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus and its vocabulary.
    GenCorpus {
        /// Output directory (train/dev/test JSONL, vocab.json, corpus.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model variant.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Training report (defaults to the checkpoint path with `.train.json`).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Word-prediction evaluation (MRR, Recall@k, perplexity).
    EvalPredict {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        split: Split,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-position CSV.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Word-completion evaluation with the simulated typist.
    EvalComplete {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        split: Split,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-word event CSV.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Theoretical and vocabulary keystroke-savings bounds.
    Bounds {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        split: Split,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Suggestion lists, value substitution and likelihood ratios.
    Qualitative {
        #[command(subcommand)]
        study: QualitativeCommand,
    },
    /// Serve the JSON API for every checkpoint in a directory.
    Serve {
        #[arg(long, env = "PREDTEXT_MODELS")]
        models: PathBuf,
    },
    /// Type with live predictions in the terminal. Tab accepts, Enter ends.
    Interactive {
        #[arg(long)]
        model: PathBuf,
        /// JSON array of KB tuples.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Read keys from stdin without a terminal (tab = accept, newline = end)
        /// and print the final tally as JSON.
        #[arg(long)]
        script: bool,
    },
    /// Merge JSON reports into comparison tables.
    Report {
        /// Report files or directories containing `*.json` reports.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Directory for tables.txt, prediction.csv and completion.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum QualitativeCommand {
    /// Top-k suggestions before a word, with ranks of watch words.
    Suggest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        split: Split,
        #[arg(long)]
        doc: String,
        #[arg(long)]
        position: usize,
        #[arg(long = "top", default_value_t = 5)]
        top: usize,
        /// Comma-separated words whose ranks are reported.
        #[arg(long, value_delimiter = ',')]
        watch: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Document probabilities of candidate words under value rewrites.
    Substitution {
        #[arg(long)]
        model: PathBuf,
        /// Study JSON (the `/v1/substitution` body without `model_id`).
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-word likelihood ratio of model A over model B.
    Ratio {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        split: Split,
        #[arg(long)]
        doc: String,
        /// Ablation applied to model B (model A uses `--ablation`).
        #[arg(long, default_value = "none", value_parser = |s: &str| s.parse::<predtext::lm::Ablation>().map_err(|e| e.to_string()))]
        ablation_b: predtext::lm::Ablation,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
}

/// Exit code for a failed run: 4 for diverging numerics, 3 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let numeric = err.chain().any(|e| e.downcast_ref::<predtext::Error>().is_some_and(predtext::Error::is_numeric));
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_DATA
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.resolve()?;
    commands::dispatch(&config, cli.command)
}
