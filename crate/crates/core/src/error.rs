use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside its admissible domain (e.g. numerology 7).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or incomplete configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A config file line that could not be interpreted.
    #[error("config error at line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    /// Reference to a UE or carrier that does not exist.
    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("search error: {0}")]
    Search(String),

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than by a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::ConfigLine { .. }
                | Error::MissingKey(_)
                | Error::Parse { .. }
                | Error::Domain(_)
        )
    }
}
