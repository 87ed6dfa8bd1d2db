use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, symmetry, ordering).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The rate target cannot be met within the power budget.
    #[error("outage: rate target unreachable (best achievable {best_rate:.6} bits/s/Hz)")]
    Outage { best_rate: f64 },

    #[error("block diagonalization infeasible: {0}")]
    Dimension(String),

    #[error("quadrature did not converge: worst entry ({row}, {col}) error estimate {error:.3e}")]
    Quadrature { row: usize, col: usize, error: f64 },

    #[error("unsupported antenna regime: {0}")]
    UnsupportedRegime(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
