use std::path::PathBuf;

/// Errors raised across the reduction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside the domain of an operation (bad index, empty input, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller broke an operation's contract (misaligned lengths, wrong goal kind, ...).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Invalid or incomplete configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A NaN or infinite value reached a boundary that rejects it.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that stem from configuration rather than runtime state.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
