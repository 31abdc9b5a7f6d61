use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("sample: {0}")]
    Sample(String),
    #[error(transparent)]
    Core(#[from] collapse_core::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
