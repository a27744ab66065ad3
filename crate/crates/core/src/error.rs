use thiserror::Error;

/// Errors raised by the simulator and its algorithms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("relation `{relation}` has no attribute `{attribute}`")]
    UnknownAttribute { relation: String, attribute: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown input id {0}")]
    UnknownInput(usize),
    #[error("key group `{key}` holds {size} units but reducer capacity is {q}; use the skew strategy")]
    OversizedGroup { key: String, size: u64, q: u64 },
    #[error("input {input} of size {size} exceeds the per-bin capacity {capacity}")]
    Infeasible { input: usize, size: u64, capacity: u64 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("digest collisions persisted after {0} rehashes")]
    HashExhausted(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
