//! `lseg` command-line entry points.
//!
//! [`run`] parses arguments, runs one command and maps failures to distinct
//! exit codes ([`EXIT_USAGE`], [`EXIT_IO`], [`EXIT_VALIDATION`],
//! [`EXIT_NUMERIC`]) with a one-line diagnostic on stderr.

mod commands;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lseg_core::model::BlockKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] lseg_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Server(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use lseg_core::Error as E;
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Io { .. } => EXIT_IO,
            Self::Server(_) => EXIT_OTHER,
            Self::Core(e) => match e {
                E::Io { .. } | E::Image { .. } => EXIT_IO,
                E::Numeric(_) | E::UndefinedMetric(_) => EXIT_NUMERIC,
                _ => EXIT_VALIDATION,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lseg", version, about = "Segment images against label sets chosen at run time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset, or run the held-out-fold benchmark.
    Eval(EvalArgs),
    /// Segment one image against a comma-separated label list.
    Predict(PredictArgs),
    /// Run the regularizer-depth or embedding-dimension ablation.
    Ablate(AblateArgs),
    /// Render a synthetic dataset.
    GenData(GenDataArgs),
    /// Write the synthetic vocabulary as an embedding table.
    MakeVocab(MakeVocabArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` settings file (model, training and scene keys).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    table: PathBuf,
    /// Dataset directory (with manifest.txt).
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Start from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    block: Option<BlockKind>,
    #[arg(long, value_parser = parse_depth)]
    depth: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Query labels (default: the dataset's own label set).
    #[arg(long)]
    labels: Option<String>,
    /// Held-out fold of the synthetic benchmark: an index or `all`.
    #[arg(long)]
    fold: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// CSV report path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    image: PathBuf,
    /// Ordered, comma-separated labels, e.g. "sky,road,house,plant".
    #[arg(long)]
    labels: String,
    /// Colour PNG to write; the legend goes next to it.
    #[arg(long)]
    out: PathBuf,
    /// Treat the first label as the "other" class.
    #[arg(long)]
    other: bool,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    common: Common,
    /// `depth` (block kind x depth) or `dim` (embedding dimension).
    #[arg(long, default_value = "depth")]
    sweep: String,
    /// Restrict the depth sweep to one block kind.
    #[arg(long)]
    block: Option<BlockKind>,
    /// Restrict the depth sweep to one depth.
    #[arg(long, value_parser = parse_depth)]
    depth: Option<usize>,
    /// Dimensions of the `dim` sweep.
    #[arg(long, default_value = "16,64,128")]
    dims: String,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    /// Vocabulary whose vectors define the class textures (default: the
    /// configured synthetic vocabulary).
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MakeVocabArgs {
    #[command(flatten)]
    common: Common,
    /// Extra words beyond "other" and the configured classes.
    #[arg(long)]
    labels: Option<String>,
    /// Table to write (`.txt` for the text format).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "LSEG_CHECKPOINT")]
    checkpoint: PathBuf,
    #[arg(long, env = "LSEG_TABLE")]
    table: PathBuf,
    #[arg(long, env = "LSEG_ADDR", default_value = "127.0.0.1:8080")]
    addr: std::net::SocketAddr,
}

fn parse_depth(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(d @ (0 | 1 | 2 | 4)) => Ok(d),
        _ => Err(format!("depth must be one of 0, 1, 2, 4; got `{s}`")),
    }
}

/// Runs `lseg` with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::GenData(a) => commands::gen_data(a),
        Command::MakeVocab(a) => commands::make_vocab(a),
        Command::Serve(a) => commands::serve(a),
    }
}
