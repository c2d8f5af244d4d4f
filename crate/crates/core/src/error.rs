//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input data violates a documented precondition.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A parameter or configuration value is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A problem exceeds a sampler's variable limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A sampler backend failed.
    #[error("sampler error: {0}")]
    Sampler(String),

    /// Remote sampler: the endpoint could not be reached.
    #[error("remote connection failed: {0}")]
    RemoteConnection(String),

    /// Remote sampler: the job did not finish within the deadline.
    #[error("remote job timed out after {0:?}")]
    RemoteTimeout(std::time::Duration),

    /// Remote sampler: the server reported the job as failed.
    #[error("remote job failed: {0}")]
    RemoteJobFailed(String),

    /// Remote sampler: a response could not be decoded.
    #[error("malformed remote response: {0}")]
    RemoteMalformed(String),

    /// Remote sampler: a returned energy disagrees with local recomputation.
    #[error("remote energy mismatch on sample {sample}: reported {reported}, recomputed {recomputed}")]
    RemoteIntegrity {
        sample: usize,
        reported: f64,
        recomputed: f64,
    },

    /// A local model failed to train; carries the center index for context.
    #[error("local model at center {center} failed: {source}")]
    LocalTraining {
        center: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
