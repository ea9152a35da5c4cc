//! `cctree`: extract Code Change Trees from Java functions, build
//! vocabularies and embedding models, featurize change records and run the
//! cross-validated comparison of representations.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cctree::change::RankMode;
use cctree::embed::EmbedConfig;
use cctree::features::Representation;

#[derive(Debug, Parser)]
#[command(name = "cctree", version, about = "Code Change Tree extraction and evaluation")]
struct Cli {
    /// Worker threads for per-record work. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1, env = "CCTREE_THREADS")]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Tree,
    Tokens,
    Stats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    /// Labelled records with a planted vulnerable edit pattern.
    Planted,
    /// Unlabelled records differing by one statement.
    SingleEdit,
}

#[derive(Debug, Args)]
struct RankArg {
    /// Whether child ranks take part in node identity.
    #[arg(long, default_value_t = RankMode::None, env = "CCTREE_RANK_MODE")]
    rank_mode: RankMode,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long, default_value_t = 100, env = "CCTREE_DIM")]
    dim: usize,
    #[arg(long, default_value_t = 20, env = "CCTREE_EPOCHS")]
    epochs: usize,
    #[arg(long, default_value_t = 5, env = "CCTREE_NEGATIVE")]
    negative: usize,
    #[arg(long, default_value_t = 0.025, env = "CCTREE_LEARNING_RATE")]
    learning_rate: f64,
    #[arg(long, default_value_t = 50, env = "CCTREE_INFER_EPOCHS")]
    infer_epochs: usize,
    /// Minimum document frequency, as a fraction of the corpus.
    #[arg(long, default_value_t = 0.01, env = "CCTREE_MIN_DF")]
    min_df: f64,
}

impl EmbedArgs {
    fn config(&self, seed: u64) -> EmbedConfig {
        EmbedConfig {
            dim: self.dim,
            epochs: self.epochs,
            negative_samples: self.negative,
            learning_rate: self.learning_rate,
            seed,
            infer_epochs: self.infer_epochs,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the syntax tree of a Java file.
    Parse {
        file: PathBuf,
        /// Emit the tree as JSON instead of an indented outline.
        #[arg(long, env = "CCTREE_JSON")]
        json: bool,
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: Option<PathBuf>,
    },
    /// Compute the Code Change Trees of one method between two files.
    Diff {
        pre: PathBuf,
        post: PathBuf,
        /// Method to compare, as `name` or `Class.name(arity)`. May be
        /// omitted when each file holds a single method.
        #[arg(long, env = "CCTREE_METHOD")]
        method: Option<String>,
        #[command(flatten)]
        rank: RankArg,
        #[arg(long, value_enum, default_value_t = Emit::Tree, env = "CCTREE_EMIT")]
        emit: Emit,
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: Option<PathBuf>,
    },
    /// Mean node counts of full ASTs and change trees over a record corpus.
    Stats {
        records: PathBuf,
        #[command(flatten)]
        rank: RankArg,
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: Option<PathBuf>,
    },
    /// Vocabulary operations.
    Vocab {
        #[command(subcommand)]
        command: VocabCommand,
    },
    /// Embedding model operations.
    Embed {
        #[command(subcommand)]
        command: EmbedCommand,
    },
    /// Write the feature vectors of a record corpus as CSV.
    Featurize {
        records: PathBuf,
        #[arg(long, env = "CCTREE_MODE")]
        mode: Representation,
        /// Embedding model; required by the simple and change_tree modes.
        #[arg(long, env = "CCTREE_MODEL")]
        model: Option<PathBuf>,
        #[command(flatten)]
        rank: RankArg,
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: PathBuf,
    },
    /// Cross-validate every classifier on every representation.
    Evaluate {
        records: PathBuf,
        /// `all` or a comma-separated list of metrics, simple, change_tree.
        #[arg(long, default_value = "all", env = "CCTREE_MODES")]
        modes: String,
        #[arg(long, default_value_t = 10, env = "CCTREE_FOLDS")]
        folds: usize,
        #[arg(long, default_value_t = 0, env = "CCTREE_SEED")]
        seed: u64,
        /// Embedding model. When omitted, one is trained on the records.
        #[arg(long, env = "CCTREE_MODEL")]
        model: Option<PathBuf>,
        /// Train on the imbalanced folds as they are.
        #[arg(long, env = "CCTREE_NO_UPSAMPLE")]
        no_upsample: bool,
        /// Positive rate assumed by the random-guesser row.
        #[arg(long, default_value_t = 0.2, env = "CCTREE_BASELINE_RATE")]
        baseline_rate: f64,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        rank: RankArg,
        /// JSON report; a Markdown table is written next to it.
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: PathBuf,
    },
    /// Run the bundled "Hello, World!" example end to end.
    DemoExample {
        #[command(flatten)]
        rank: RankArg,
        #[arg(long, env = "CCTREE_JSON")]
        json: bool,
    },
    /// Generate a synthetic record corpus.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(short = 'n', long, default_value_t = 500, env = "CCTREE_COUNT")]
        count: usize,
        #[arg(long, default_value_t = 0, env = "CCTREE_SEED")]
        seed: u64,
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum VocabCommand {
    /// Build a document-frequency vocabulary from a record corpus.
    Build {
        corpus: PathBuf,
        #[arg(long, default_value_t = 0.01, env = "CCTREE_MIN_DF")]
        min_df: f64,
        #[command(flatten)]
        rank: RankArg,
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum EmbedCommand {
    /// Train an embedding model on a record corpus.
    Train {
        corpus: PathBuf,
        #[arg(long, default_value_t = 0, env = "CCTREE_SEED")]
        seed: u64,
        /// Use this vocabulary instead of building one.
        #[arg(long, env = "CCTREE_VOCAB")]
        vocab: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        rank: RankArg,
        #[arg(short, long, env = "CCTREE_OUTPUT")]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
