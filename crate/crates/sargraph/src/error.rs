use thiserror::Error;

/// Error classes surfaced by the library and mapped to CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad user configuration (unknown labels, invalid hyperparameters, ...).
    #[error("{0}")]
    Config(String),

    /// Dimension mismatch between inputs.
    #[error("{0}")]
    Shape(String),

    /// Parameters outside a distribution's valid region.
    #[error("{0}")]
    Domain(String),

    /// Restriction does not identify the model (e.g. too few masked entries).
    #[error("{0}")]
    Identifiability(String),

    /// Spatial-effect state violates the stability condition.
    #[error("{0}")]
    Stability(String),

    /// Numerical failure (non-convergence, loss of positive definiteness, ...).
    #[error("{0}")]
    Numeric(String),

    /// Malformed input file.
    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-parseable class name, used in CLI error lines.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Domain(_) => "domain",
            Error::Identifiability(_) => "identifiability",
            Error::Stability(_) => "stability",
            Error::Numeric(_) => "numeric",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Shape(_)
                | Error::Identifiability(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
