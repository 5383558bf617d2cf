//! Error types shared across the simulation pipeline.

use thiserror::Error;

/// Errors produced while building channels, designing beamformers, or
/// evaluating a link.
#[derive(Debug, Error)]
pub enum Error {
    /// Array construction or steering request is geometrically invalid.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// An observation point (or a receive element) collides with an array
    /// element, making the spherical-wave range singular.
    #[error("singular range: {0}")]
    SingularRange(String),

    /// Matrix or vector dimensions do not chain.
    #[error("{module}: dimension mismatch: {message}")]
    DimensionMismatch {
        module: &'static str,
        message: String,
    },

    /// A channel component does not carry the required Frobenius-norm
    /// normalization.
    #[error("channel component not normalized: {0}")]
    NotNormalized(String),

    /// A zero-forcing projection was requested but the interference spans the
    /// whole space, leaving no complement to project onto.
    #[error("empty null space: {0}")]
    EmptyNullSpace(String),

    /// A parameter violates its documented range.
    #[error("{module}: invalid parameter: {message}")]
    InvalidParameter {
        module: &'static str,
        message: String,
    },

    /// An interference covariance fed to the rate evaluation has a
    /// significantly negative eigenvalue.
    #[error("interference covariance not positive semidefinite: {0}")]
    NonPsdCovariance(String),

    /// Scenario text failed to parse or validate.
    #[error("config error in [{section}]{}: {message}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        section: String,
        line: Option<usize>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(module: &'static str, message: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn param(module: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn config(section: &str, message: impl Into<String>) -> Self {
        Error::Config {
            section: section.to_string(),
            line: None,
            message: message.into(),
        }
    }

    /// Name of the subsystem the error originated in, for batch-run
    /// diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) | Error::SingularRange(_) => "array-geometry",
            Error::NotNormalized(_) => "si-channel",
            Error::EmptyNullSpace(_) => "cancellation",
            Error::NonPsdCovariance(_) => "link-eval",
            Error::DimensionMismatch { module, .. } | Error::InvalidParameter { module, .. } => {
                module
            }
            Error::Config { .. } => "scenario",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
