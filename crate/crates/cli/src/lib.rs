//! Support code for the `qsvm` binary: run configuration, model
//! persistence, and prediction-map rendering.

pub mod config;
pub mod model_io;
pub mod render;

/// CLI-level failures, classified for exit codes (2 config, 3 data,
/// 4 backend via the wrapped core error).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] qubo_svm::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Core(core) => core_exit_code(core),
        }
    }
}

fn core_exit_code(err: &qubo_svm::Error) -> i32 {
    use qubo_svm::Error as E;
    match err {
        E::InvalidParam(_) | E::Capacity(_) => 2,
        E::Parse { .. } | E::InvalidData(_) | E::DimensionMismatch(_) | E::Io(_) => 3,
        E::Sampler(_)
        | E::RemoteConnection(_)
        | E::RemoteTimeout(_)
        | E::RemoteJobFailed(_)
        | E::RemoteMalformed(_)
        | E::RemoteIntegrity { .. } => 4,
        E::LocalTraining { source, .. } => core_exit_code(source),
    }
}
