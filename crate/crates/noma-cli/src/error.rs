use thiserror::Error;

/// Errors surfaced by the experiment runner.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },
    #[error(transparent)]
    Core(#[from] noma_sic_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
