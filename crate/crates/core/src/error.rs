use thiserror::Error;

pub type Result<T> = std::result::Result<T, SddeError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SddeError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("span mismatch: expected window length {expected}, found {found}")]
    SpanMismatch { expected: f64, found: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("time {t} lies outside the path span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error(
        "insufficient history: functional needs the path from {needed}, path starts at {start}"
    )]
    InsufficientHistory { needed: f64, start: f64 },

    #[error("argument-principle root count unstable after {attempts} contour jitters")]
    RootCountUnstable { attempts: usize },

    #[error("improper integral diverges: {reason}")]
    Divergence { reason: String },

    #[error("solution blew up (non-finite state) at t = {t}")]
    BlowUp { t: f64 },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<SddeError>,
    },

    #[error("characteristic function vanishes at i*{xi}; spectral density is singular")]
    SpectralSingularity { xi: f64 },

    #[error("methods disagree: {what} differs by {diff:e} (allowed {allowed:e})")]
    SelfCheck {
        what: &'static str,
        diff: f64,
        allowed: f64,
    },

    #[error("too few samples: {what} needs {needed}, have {have}")]
    TooFewSamples {
        what: &'static str,
        needed: usize,
        have: usize,
    },

    #[error("infinite moment: {what}")]
    InfiniteMoment { what: &'static str },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl SddeError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        SddeError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for SddeError {
    fn from(e: std::io::Error) -> Self {
        SddeError::Io(e.to_string())
    }
}

impl From<csv::Error> for SddeError {
    fn from(e: csv::Error) -> Self {
        SddeError::Io(e.to_string())
    }
}
