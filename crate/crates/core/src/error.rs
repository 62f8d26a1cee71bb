use thiserror::Error;

/// Errors raised by the analysis, simulation and reference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// An analysis would need more terms than the configured hard cap.
    #[error("{what} needs {needed} terms, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        needed: f64,
        cap: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },

    #[error("prior support must lie in [0, {n}], got length {len}")]
    PriorSupport { n: usize, len: usize },

    #[error("mixture needs at least one class")]
    EmptyMixture,

    #[error("cdf samples are not monotone at index {index}")]
    NonMonotoneCdf { index: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
