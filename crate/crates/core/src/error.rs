//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by construction, validation and engine guards.
///
/// Guard errors ([`Error::TruncationTooSmall`], [`Error::DenseStateTooLarge`],
/// [`Error::GridMisaligned`], [`Error::Parse`]) indicate configuration
/// problems rather than verification failures; the command-line layer maps
/// them to a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("breakpoints must be strictly increasing and positive: index {index} holds {value}")]
    BadBreakpoints { index: usize, value: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error(
        "truncation level too small for rigorous tail: M*t = {mt:.6} must lie below N + 2 = {limit}"
    )]
    TruncationTooSmall { mt: f64, limit: f64 },

    #[error("dense state dimension {requested} exceeds the cap of {cap}; lower the slot count")]
    DenseStateTooLarge { requested: u128, cap: u128 },

    #[error("no conjugation structure: the initial space carries no involution matrix")]
    MissingInvolution,

    #[error("involution is not a conjugation: J*conj(J) deviates from the identity by {defect:.3e}")]
    InvalidInvolution { defect: f64 },

    #[error("semigroup table is missing probes: {missing}")]
    MissingProbes { missing: String },

    #[error("localisation cap {cap} exceeded: not finitely localisable at this cap")]
    LocalisationCapExceeded { cap: usize },

    #[error("slot grid misaligned: {0}")]
    GridMisaligned(String),

    #[error("invalid instance at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o failure on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for errors that signal a configuration or guard problem,
    /// as opposed to a failed verification.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::TruncationTooSmall { .. }
                | Error::DenseStateTooLarge { .. }
                | Error::GridMisaligned(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::DimensionMismatch { .. }
                | Error::BadBreakpoints { .. }
                | Error::NonFinite { .. }
                | Error::InvalidInvolution { .. }
                | Error::MissingInvolution
                | Error::MissingProbes { .. }
                | Error::LocalisationCapExceeded { .. }
        )
    }
}
