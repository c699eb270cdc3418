use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] mmangle::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 for invariant violations, 2 for unusable input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 1,
            _ => 2,
        }
    }
}
