use thiserror::Error;

/// Errors raised anywhere in the analytic engine, the simulator or the CLI.
#[derive(Debug, Error)]
pub enum DtnError {
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("routing rule failed validation: {0}")]
    Validation(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("grid too coarse: {what} defect {defect:.4} exceeds {limit} (at {location})")]
    GridTooCoarse {
        what: &'static str,
        defect: f64,
        limit: f64,
        location: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("simulation invariant violated: {0}")]
    SimInvariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DtnError {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        DtnError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 1 for validation/configuration problems, 2 for
    /// numeric gates and solver failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            DtnError::Domain { .. }
            | DtnError::InvalidParameter { .. }
            | DtnError::Config(_)
            | DtnError::Validation(_)
            | DtnError::Unsupported(_)
            | DtnError::Io(_)
            | DtnError::Json(_)
            | DtnError::Csv(_) => 1,
            DtnError::GridTooCoarse { .. }
            | DtnError::NonFinite(_)
            | DtnError::NonConvergence { .. }
            | DtnError::SimInvariant(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, DtnError>;
