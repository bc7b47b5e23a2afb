//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are grouped by failure class so callers (notably the CLI) can
/// map them onto stable exit codes: configuration/parameter problems,
/// I/O and file-format problems, and numeric/training failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented domain (e.g. emissivity of 0).
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    /// Array shapes did not match an operation's contract.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid run or module configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A handle was asked to do something it does not support
    /// (e.g. white-box training against a non-differentiable detector).
    #[error("capability error: {0}")]
    Capability(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Image encode/decode failure.
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    /// A structured file (adapter, detector, sidecar) did not match its format.
    #[error("format error: {0}")]
    Format(String),

    /// One half of a visible/infrared pair is missing on disk.
    #[error("pairing error for sample '{id}': {reason}")]
    Pairing { id: String, reason: String },

    /// A label file line could not be parsed.
    #[error("label parse error at {path}:{line}: {reason}")]
    LabelParse {
        path: String,
        line: usize,
        reason: String,
    },

    /// Wire-protocol violation while talking to an external detector.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    /// Training finished without reaching its quality gate.
    #[error("training failure: {0}")]
    TrainingFailure(String),

    /// ASR is undefined because no clean detections exist.
    #[error("undefined ASR: no clean detections to suppress")]
    UndefinedAsr,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for this error class.
    ///
    /// 2 = configuration/parameter error, 3 = I/O or file-format error,
    /// 4 = numeric or training failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParamDomain(_)
            | Error::Shape(_)
            | Error::Config(_)
            | Error::Capability(_) => 2,
            Error::Io(_)
            | Error::Image(_)
            | Error::Format(_)
            | Error::Pairing { .. }
            | Error::LabelParse { .. }
            | Error::Protocol(_) => 3,
            Error::Divergence { .. } | Error::TrainingFailure(_) | Error::UndefinedAsr => 4,
        }
    }
}
