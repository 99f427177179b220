use thiserror::Error;

/// Errors raised across the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("non-finite gradient in {layer} (max magnitude {max_magnitude})")]
    NonFiniteGradient { layer: String, max_magnitude: f64 },

    #[error("training diverged at epoch {epoch} (non-finite {quantity})\n{curve}")]
    Diverged {
        epoch: usize,
        quantity: &'static str,
        curve: String,
    },

    #[error("not enough samples: {what} needs at least {needed}, found {found}")]
    InsufficientSamples {
        what: String,
        needed: usize,
        found: usize,
    },

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.into(),
        }
    }

    /// Prefixes a configuration error's field path with `section`.
    pub fn within(self, section: &str) -> Self {
        match self {
            Error::Config { path, message } => Error::Config {
                path: format!("{section}.{path}"),
                message,
            },
            other => other,
        }
    }
}
