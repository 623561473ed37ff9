use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cosrec::train::DatasetKind;
use cosrec::Variant;

#[derive(Debug, Parser)]
#[command(name = "cosrec", version, about = "Sequential recommendation with a 2D CNN over pairwise item encodings")]
pub struct Cli {
    /// Directory used for any omitted input/output path.
    #[arg(long, global = true, env = "COSREC_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw log, filter it and write a dataset file.
    Preprocess(PreprocessArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Print test-split metrics as one JSON line.
    Evaluate(EvaluateArgs),
    /// Write one CSV per convolution filter of a layer.
    ExportFilters(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Ml1m,
    Gowalla,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Ml1m => DatasetKind::Ml1m,
            DatasetArg::Gowalla => DatasetKind::Gowalla,
        }
    }
}

impl DatasetArg {
    pub fn raw_file_name(self) -> &'static str {
        match self {
            DatasetArg::Ml1m => "ml-1m/ratings.dat",
            DatasetArg::Gowalla => "loc-gowalla_totalCheckins.txt",
        }
    }

    pub fn dataset_file_name(self) -> &'static str {
        match self {
            DatasetArg::Ml1m => "ml1m.cosrec",
            DatasetArg::Gowalla => "gowalla.cosrec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Cnn,
    MlpBase,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Cnn => Variant::Cnn,
            VariantArg::MlpBase => Variant::MlpBase,
        }
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long, value_enum, default_value = "ml1m")]
    pub dataset: DatasetArg,
    /// Raw log; defaults to the standard file name inside the data directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Dataset file to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Minimum actions per user (default 5 for ml1m, 15 for gowalla).
    #[arg(long)]
    pub min_user: Option<u32>,
    /// Minimum actions per item (default 5 for ml1m, 15 for gowalla).
    #[arg(long)]
    pub min_item: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file from `preprocess`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch JSONL log; defaults to `<out>.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Selects the default embedding size.
    #[arg(long, value_enum, default_value = "ml1m")]
    pub dataset: DatasetArg,
    /// Embedding size d (default 50 for ml1m, 100 for gowalla).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub markov_order: usize,
    #[arg(long, default_value_t = 3)]
    pub horizon: usize,
    /// Negatives sampled per target.
    #[arg(long, default_value_t = 3)]
    pub negatives: usize,
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    /// Channels of the first convolution block.
    #[arg(long, default_value_t = 128)]
    pub d1: usize,
    /// Channels of the second convolution block.
    #[arg(long, default_value_t = 256)]
    pub d2: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "cnn")]
    pub variant: VariantArg,
    /// Kernel of the first convolution.
    #[arg(long, default_value_t = 1, value_parser = parse_kernel)]
    pub first_kernel: usize,
    /// Epochs without validation improvement before stopping (0 = never).
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Share of each training sequence held out for validation (0 = none).
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// Threads for the final evaluation (training is single-threaded).
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate a baseline instead of a checkpoint.
    #[arg(long, value_enum)]
    pub model: Option<BaselineArg>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Poprec,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One of conv1_1, conv1_2, conv2_1, conv2_2.
    #[arg(long)]
    pub layer: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_kernel(s: &str) -> Result<usize, String> {
    match s {
        "1" | "3" | "5" => Ok(s.parse().expect("matched a digit")),
        _ => Err(format!("{s} is not one of 1, 3, 5")),
    }
}
