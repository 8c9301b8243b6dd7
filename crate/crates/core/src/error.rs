use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("integration failed: step size underflow at t = {last_good_time}")]
    IntegrationFailure { last_good_time: f64 },

    #[error("degenerate Gaussian state: {0}")]
    DegenerateState(&'static str),

    #[error("matrix inversion refused: condition number {condition:.3e} exceeds guard")]
    IllConditioned { condition: f64 },

    #[error("covariance matrix is not physical (minimum eigenvalue of σ + iΩ/2 is {min_eigenvalue:.3e})")]
    NonPhysical { min_eigenvalue: f64 },

    #[error("click probability {p_click:.3e} is too small to condition on")]
    ZeroProbability { p_click: f64 },

    #[error("Fock truncation captured only {achieved:.6} of the trace (required {required})")]
    Truncation { achieved: f64, required: f64 },

    #[error("drift matrix is not Hurwitz stable (max real part {margin:.3e})")]
    Unstable { margin: f64 },

    #[error("spectral quadrature did not converge (residual {residual:.3e})")]
    QuadratureNonConvergence { residual: f64 },

    #[error("input and output bath envelopes are degenerate (|ρ_c| = {rho_c})")]
    DegenerateEnvelope { rho_c: f64 },

    #[error("symplectic completion failed: {0}")]
    CompletionFailure(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
