//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped roughly by failure class: input/format problems,
/// parameter misuse, and numerical/degeneracy conditions detected during
/// fitting or estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("duplicate entry: {0}")]
    Duplicate(String),

    #[error("degenerate structure: {0}")]
    DegenerateStructure(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("mapping error: {0}")]
    Mapping(String),

    /// Response vector unusable for the requested fit (e.g. single-class y).
    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    /// Logistic coefficients diverging, indicating separable classes.
    #[error("separation detected: {0}")]
    Separation(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("subgroup error: {0}")]
    Subgroup(String),

    #[error("propensity error: {0}")]
    Propensity(String),

    #[error("stabilization error: {0}")]
    Stabilization(String),

    #[error("degenerate covariate: {0}")]
    DegenerateCovariate(String),

    #[error("collinear columns: {0}")]
    Collinearity(String),

    /// Structural precondition not met (e.g. exposure structure not derived).
    #[error("structural error: {0}")]
    Structure(String),

    #[error("bootstrap failure: {0}")]
    Bootstrap(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by malformed or unreadable input data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_) | Error::Duplicate(_) | Error::Dimension(_) | Error::Io { .. }
        )
    }

    /// True for configuration or parameter misuse.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parameter(_) | Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
