//! Crate-wide error type.

/// Errors surfaced by construction, evaluation and solver routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("{what} outside valid domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("quadrature did not converge on [{a:e}, {b:e}]: {detail}")]
    Quadrature { a: f64, b: f64, detail: String },

    #[error("root search failed: {0}")]
    RootSearch(String),

    #[error("table is not usable: {0}")]
    Table(String),

    #[error("window is unusable: {0}")]
    Window(String),

    #[error("solver failed: {message}")]
    Solve {
        message: String,
        residual_history: Vec<f64>,
    },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}
