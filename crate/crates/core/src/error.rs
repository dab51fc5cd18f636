use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("state diverged at t = {time}")]
    BlowUp { time: f64 },
    #[error("dense weight matrix for {requested} neurons exceeds the memory bound; use at most {suggested} neurons")]
    Capacity { requested: usize, suggested: usize },
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fit window too short: {0}")]
    WindowTooShort(String),
    #[error("ambiguous equilibrium: {0}")]
    Ambiguous(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. } | Error::NonConvergence { .. } | Error::WindowTooShort(_)
        )
    }
}
