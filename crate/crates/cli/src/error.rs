use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration could not be read, parsed or validated.
    #[error("configuration error {0}")]
    Config(String),

    /// Every grid point of a run failed in the physics layer.
    #[error("all {points} grid points of scenario `{scenario}` failed; first error: {first}")]
    AllPointsFailed {
        scenario: String,
        points: usize,
        first: String,
    },

    #[error("physics error: {0}")]
    Physics(#[from] heralded_core::Error),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 when the physics
    /// failed everywhere, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::AllPointsFailed { .. } | CliError::Physics(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
