use thiserror::Error;

/// Errors produced by the scheduler library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or value outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// SGD produced a non-finite training error.
    #[error("SGD diverged with learning rate eta = {eta}")]
    Diverged { eta: f64 },

    /// The RBF interpolation system could not be solved.
    #[error("singular interpolation system: {0}")]
    Singular(String),

    /// No assignment satisfies the hard constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Exhaustive search refused because the space is too large.
    #[error("search space has {points:e} points, above the limit of {limit:e}")]
    SpaceTooLarge { points: f64, limit: f64 },

    /// A reconstruction failed; `matrix` names which of the three fits.
    #[error("{matrix} reconstruction failed: {source}")]
    Reconstruction {
        matrix: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse { line, msg: e.to_string() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
