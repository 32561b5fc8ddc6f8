use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("argument {value} outside tabulated range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },
    #[error("Legendre dual is degenerate: {0}")]
    DegenerateDual(String),
    #[error("Δ₂ regularity violated: {0}")]
    Delta2Violation(String),
    #[error("mode count {n_modes} outside 1..={n_grid}")]
    ModesOutOfRange { n_modes: usize, n_grid: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite state after step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },
    #[error(
        "explicit stability guard violated at step {step}: dt*lambda*sup|psi'| = {value} > 2; \
         reduce dt, reduce n_modes or use the semi-implicit scheme"
    )]
    Stability { step: usize, value: f64 },
    #[error("Newton solve did not converge at step {step}: {iterations} iterations, residual {residual}")]
    Convergence { step: usize, iterations: usize, residual: f64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Validation { what, reason: reason.into() }
}
