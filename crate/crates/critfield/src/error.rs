use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature for {what} did not converge (achieved {achieved:e}, requested {requested:e})")]
    QuadratureNotConverged {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("matrix is not positive semidefinite (pivot {pivot:e} at index {index})")]
    NotPsd { pivot: f64, index: usize },

    #[error("degenerate conditioning: observed block has smallest pivot {smallest_pivot:e}")]
    DegenerateConditioning { smallest_pivot: f64 },

    #[error("lattice radius {radius} too small: outermost shell contributes {tail:e}")]
    LatticeRadiusTooSmall { radius: usize, tail: f64 },

    #[error("frequency budget exceeded: {needed} active frequencies, budget {budget}")]
    FrequencyBudget { needed: usize, budget: usize },

    #[error("enumeration unreliable: {failures} of {seeds} Newton seeds failed")]
    EnumerationUnreliable { failures: usize, seeds: usize },

    #[error("enumeration incomplete: {0}")]
    EnumerationIncomplete(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("numerical tolerance not met: {0}")]
    Tolerance(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EnumerationIncomplete(_) | Error::Invariant(_) => 2,
            Error::QuadratureNotConverged { .. }
            | Error::NotPsd { .. }
            | Error::DegenerateConditioning { .. }
            | Error::LatticeRadiusTooSmall { .. }
            | Error::FrequencyBudget { .. }
            | Error::EnumerationUnreliable { .. }
            | Error::Tolerance(_) => 3,
            Error::InvalidArgument(_) | Error::Config(_) => 4,
            Error::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
