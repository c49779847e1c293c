use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bit layout: {0}")]
    BitSpec(String),

    #[error("coordinate {value} in dimension {dim} does not fit in {bits} bits")]
    Domain { dim: usize, value: u64, bits: u32 },

    #[error("invalid query box: {0}")]
    QueryBox(String),

    #[error("prefix state error: {0}")]
    PrefixState(String),

    #[error("training diverged at epoch {epoch} (loss = {loss}); try a lower learning rate")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid build parameter: {0}")]
    Build(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("ingestion error at row {row}: {msg}")]
    Ingest { row: usize, msg: String },

    #[error("{0}")]
    Input(String),

    #[error("scan bound violated: scanned {scanned} tuples, bound is {bound}")]
    ScanBound { scanned: u64, bound: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
