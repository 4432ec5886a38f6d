use ehrenfest_core::Error as CoreError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable process exit status.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 64,
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                CoreError::NotElliptic { .. } | CoreError::Degenerate { .. } | CoreError::AssumptionViolated(_) => 2,
                CoreError::NonConvergence { .. } | CoreError::Singular { .. } => 3,
                CoreError::PositivityAbort { .. } => 4,
                CoreError::Dimension { .. } | CoreError::InvalidArgument(_) => 64,
                CoreError::Internal(_) => 1,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "bad_config",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Validation(_) => "validation_failed",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON object for standard error.
    pub fn to_json(&self) -> String {
        let mut obj = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Validation(failed) => obj["failed"] = json!(failed),
            CliError::Core(CoreError::PositivityAbort { t, margin }) => {
                obj["t"] = json!(t);
                obj["margin"] = json!(margin);
            }
            CliError::Core(CoreError::NonConvergence { iterations, residual, last }) => {
                obj["iterations"] = json!(iterations);
                obj["residual"] = json!(residual);
                obj["last"] = json!(last);
            }
            _ => {}
        }
        obj.to_string()
    }
}
