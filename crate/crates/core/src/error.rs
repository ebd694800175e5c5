use thiserror::Error;

pub type Result<T> = std::result::Result<T, UdwError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UdwError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    /// A displacement amplitude does not fit in the Fock cutoff.
    #[error(
        "truncation: amplitude {amplitude:.4} loses {tail:.3e} of its norm at cutoff {cutoff}; \
         suggested cutoff {suggested}"
    )]
    Truncation {
        amplitude: f64,
        cutoff: usize,
        tail: f64,
        suggested: usize,
    },

    #[error("trace leakage {leakage:.3e} exceeds tolerance after truncation")]
    Leakage { leakage: f64 },

    #[error("quadrature did not converge: |Q({nodes}) - Q({refined})| = {difference:.3e} > {tolerance:.1e}")]
    Quadrature {
        nodes: usize,
        refined: usize,
        difference: f64,
        tolerance: f64,
    },
}
