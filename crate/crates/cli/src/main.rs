mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Class-imbalance toolkit for short-text classification.
#[derive(Parser, Debug)]
#[command(name = "textbal", version, about)]
pub struct Cli {
    /// Experiment file (TOML); for `grid`, a grid file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the seed of the experiment (or the seed list of a grid).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory for outputs and run artifacts.
    #[arg(long, global = true, default_value = "runs")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

/// Input file and its column names.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Delimited input file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, default_value = "text")]
    pub text_column: String,
    #[arg(long, default_value = "title")]
    pub title_column: String,
    #[arg(long, default_value = "id")]
    pub id_column: String,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Minority,
    All,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clean the text and report the IQR length filter.
    Prep {
        #[command(flatten)]
        input: InputArgs,
        /// Write the cleaned (and filtered) records here.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Report the filter without applying it to the output.
        #[arg(long)]
        no_filter: bool,
    },
    /// Train a WordPiece vocabulary, or inspect an existing one.
    Vocab {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        size: Option<usize>,
        /// Report coverage of an existing vocabulary instead of training.
        #[arg(long, conflicts_with = "output")]
        load: Option<PathBuf>,
    },
    /// Expand minority classes with EDA and write the augmented file.
    Augment {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Synonym lexicon (`word<TAB>syn,syn`); the bundled one otherwise.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Tokenize, plan random oversampling and report the applied counts.
    Balance {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Run the full pipeline for one experiment and keep its artifacts.
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Score a saved checkpoint on a labelled file.
    Eval {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Run every experiment of a grid file under every seed.
    Grid {
        /// Replace earlier rows with the same experiment names.
        #[arg(long)]
        overwrite: bool,
    },
    /// Write the synthetic imbalanced corpus.
    Synth {
        #[arg(long)]
        output: PathBuf,
        /// Per-class record counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long)]
        noise: Option<f64>,
        /// Also write the companion synonym lexicon.
        #[arg(long)]
        lexicon_out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
