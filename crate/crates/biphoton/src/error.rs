use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a domain precondition (non-positive wavelength,
    /// signal not below pump energy, zero-width window, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A stream contract was violated by the caller (e.g. events not
    /// ordered by emission time).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A fit or statistical analysis could not be carried out on the
    /// given data.
    #[error("analysis error: {0}")]
    Analysis(String),

    /// Numerical quadrature failed to converge; the message carries the
    /// achieved and requested tolerances.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A sampling grid cannot resolve the requested envelope or band
    /// structure.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A degenerate configuration with no defined result (e.g. fully
    /// opaque barrier).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// Bad configuration file or flag value.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
