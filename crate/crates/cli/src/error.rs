use nnpi::data::DataError;
use nnpi::estimators::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{context}: {source}")]
    Train {
        context: String,
        #[source]
        source: TrainError,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn training(context: impl Into<String>, source: TrainError) -> Self {
        CliError::Train {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 1 usage or config, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Train { source, .. } => match source {
                TrainError::Config(_)
                | TrainError::Uncalibrated(_)
                | TrainError::Data(DataError::Config(_)) => 1,
                TrainError::Data(_)
                | TrainError::Bundle(_)
                | TrainError::Io(_)
                | TrainError::Nn(_) => 2,
                TrainError::Divergence { .. }
                | TrainError::Loss { .. }
                | TrainError::Metrics(_) => 3,
            },
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(msg) => CliError::Config(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}
