use thiserror::Error;

/// Errors raised by the isolation-probability library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its subdivision cap before meeting tolerance.
    #[error(
        "quadrature did not converge: estimate {estimate:e} with error {error:e} after {subdivisions} subdivisions"
    )]
    NonConvergence { estimate: f64, error: f64, subdivisions: usize },

    /// An alternating sum lost too many significant digits to be trusted.
    #[error("numerical cancellation: {digits_lost:.1} decimal digits lost in {context}")]
    Cancellation { context: &'static str, digits_lost: f64 },

    /// A Monte Carlo run produced too few samples for a usable estimate.
    #[error("degenerate estimate: only {total_nodes} nodes sampled (need at least {required})")]
    DegenerateEstimate { total_nodes: u64, required: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
