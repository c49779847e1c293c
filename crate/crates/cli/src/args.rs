use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "cardindex", version, about = "Learned Z-order index with hybrid cardinality estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a CSV file into a table snapshot.
    Ingest(IngestArgs),
    /// Generate a synthetic table snapshot.
    Synth(SynthArgs),
    /// Generate a labelled query workload for a table.
    Workload(WorkloadArgs),
    /// Train the model and build the index.
    Build(BuildArgs),
    /// Run a point or range query against an index.
    Query(QueryArgs),
    /// Estimate cardinalities for a workload.
    Estimate(EstimateArgs),
    /// Time point, range and estimation suites and report q-error quantiles.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub csv: PathBuf,
    /// Comma-separated column types: int[:bits], cat, float[:bits].
    #[arg(long)]
    pub schema: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// uniform, gaussian-clusters, duplicated-prefix or checkerboard.
    #[arg(long, default_value = "gaussian-clusters")]
    pub kind: String,
    #[arg(long, default_value_t = 10_000)]
    pub rows: usize,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    #[arg(long, env = "CARDINDEX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WorkloadArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Total number of queries, cycling through the scales.
    #[arg(long, default_value_t = 1000, conflicts_with = "per_class")]
    pub count: usize,
    /// Draw until every selectivity class holds this many queries.
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.01, 0.001])]
    pub scales: Vec<f64>,
    #[arg(long, env = "CARDINDEX_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Linked neurons per output position.
    #[arg(long, default_value_t = 32)]
    pub link: usize,
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
    /// Key bits read by CDF calls; clamped to the key length.
    #[arg(long, default_value_t = 32)]
    pub ell: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IndexArgs {
    #[arg(long, default_value_t = 100)]
    pub fanout: usize,
    #[arg(long, default_value_t = 128.0)]
    pub submodels_per_million: f64,
    #[arg(long, default_value_t = 0.1)]
    pub berr_frac: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimatorArgs {
    /// Probe threshold for exact execution.
    #[arg(long, default_value_t = 1e-2)]
    pub best: f64,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 16)]
    pub depth: u32,
    #[arg(long, default_value_t = 1e-3)]
    pub delta0: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub index_out: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    #[arg(long, env = "CARDINDEX_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Point coordinates, e.g. `3,9`.
    #[arg(long, value_delimiter = ',', required_unless_present = "range", conflicts_with = "range")]
    pub point: Option<Vec<u64>>,
    /// Per-dimension bounds `lo:hi`, `*` for unconstrained, e.g. `0:10,*`.
    #[arg(long)]
    pub range: Option<String>,
    /// Print matching row ids instead of only the count.
    #[arg(long)]
    pub rows: bool,
    /// Cross-check the answer against a scan of this table snapshot.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub workload: PathBuf,
    /// JSON lines of results; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-class q-error summary; needs true cardinalities in the workload.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, env = "CARDINDEX_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub workload: PathBuf,
    /// CSV report; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resident keys probed by the point-query suite.
    #[arg(long, default_value_t = 1000)]
    pub point_queries: usize,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, env = "CARDINDEX_SEED", default_value_t = 0)]
    pub seed: u64,
}
