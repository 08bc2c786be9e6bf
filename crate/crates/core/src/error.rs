use thiserror::Error;

pub type Result<T> = std::result::Result<T, FmdError>;

#[derive(Debug, Error)]
pub enum FmdError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("profile has {got} entries but the graph has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("ladder index {index} out of range (ladder has {len} levels)")]
    InvalidIndex { index: usize, len: usize },

    #[error("node {node} out of range (graph has {len} nodes)")]
    InvalidNode { node: usize, len: usize },

    #[error("move of node {node} to index {index} does not change its strategy")]
    NoOpMove { node: usize, index: usize },

    #[error("ladder has no level for rate {0}")]
    MissingRate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested top-{k} of {n} nodes")]
    TopKTooLarge { k: usize, n: usize },

    #[error("instance too large for enumeration: {profiles} profiles (limit {limit})")]
    InstanceTooLarge { profiles: f64, limit: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("trace does not replay: {0}")]
    Replay(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
