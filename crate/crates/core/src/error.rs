use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or prior specification is malformed (e.g. missing auxiliary prior).
    #[error("specification error: {0}")]
    Specification(String),

    /// An operation was called in a way its contract forbids.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("bridge sampler did not converge after {iterations} iterations (relative change {relative_change:e})")]
    BridgeNonConvergence { iterations: usize, relative_change: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by numerical computation rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Initialization(_)
                | Error::BridgeNonConvergence { .. }
                | Error::Numerical(_)
                | Error::Calibration(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Specification(_) => "specification",
            Error::Contract(_) => "contract",
            Error::Initialization(_) => "initialization",
            Error::BridgeNonConvergence { .. } => "bridge_non_convergence",
            Error::Numerical(_) => "numerical",
            Error::Calibration(_) => "calibration",
            Error::Config(_) => "config",
            Error::Data { .. } => "data",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
