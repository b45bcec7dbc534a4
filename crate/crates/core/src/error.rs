use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum SegError {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid, potential or run configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver stopped before reaching its tolerance.
    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// A structural self-check failed during operator assembly.
    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SegError>;
