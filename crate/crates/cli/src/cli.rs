use std::path::PathBuf;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use parkcast_core::EncoderKind;

#[derive(Debug, Parser)]
#[command(name = "parkcast", version, about = "Street-level parking availability forecasting")]
pub struct Cli {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Seed for every random stream; overrides the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory for produced files
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city: lots.csv and events.csv
    Synth(SynthArgs),
    /// Parse an event log and resample it to 15-minute frames
    Ingest(IngestArgs),
    /// Write the cluster map, proximity graph and normalized series
    Preprocess(DataArgs),
    /// Train a model and write its checkpoint and history
    Train(TrainArgs),
    /// Score a checkpoint and the baselines on the test split
    Eval(EvalArgs),
    /// Forecast from the newest frames of a frame file
    Predict(PredictArgs),
    /// Serve forecasts over HTTP from a live frame feed
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub weeks: Option<u32>,
    #[arg(long)]
    pub clusters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub lots: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// First tick (RFC 3339); defaults to the earliest event
    #[arg(long)]
    pub start: Option<DateTime<Utc>>,
    /// End of the resampled range, exclusive; defaults to just past the latest event
    #[arg(long)]
    pub end: Option<DateTime<Utc>>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub lots: Option<PathBuf>,
    #[arg(long)]
    pub frames: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub kind: Option<EncoderKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Number of 15-minute steps to forecast
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Frame source: a file to tail, or `-` for standard input
    #[arg(long, default_value = "-")]
    pub feed: String,
    #[arg(long)]
    pub port: Option<u16>,
    /// Stop reading a feed file at its end instead of tailing it
    #[arg(long)]
    pub no_follow: bool,
}
