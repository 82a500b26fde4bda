use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample timestamp {got} ms is not after previous sample at {last} ms")]
    NonMonotonicTimestamp { last: u64, got: u64 },

    #[error("expected {expected} channel values, got {got}")]
    ChannelCountMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid channel set: {0}")]
    InvalidChannelSet(String),

    #[error("unknown channel name `{0}`")]
    UnknownChannel(String),

    #[error("segment [{start_s}, {end_s}) s lies outside a {duration_s} s trial")]
    SegmentOutOfRange {
        start_s: f64,
        end_s: f64,
        duration_s: u32,
    },

    #[error("trial has {got} samples, expected {expected} +/- 2")]
    TrialLength { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular composite covariance (eigenvalue {eigenvalue:e})")]
    SingularCovariance { eigenvalue: f64 },

    #[error("averaged spatial filter cancelled out (norm {norm:e})")]
    FilterCancellation { norm: f64 },

    #[error("invalid comparison matrix: {0}")]
    InvalidComparisonMatrix(String),

    #[error("power iteration did not converge within {0} iterations")]
    IterationLimit(usize),

    #[error("consistency ratio is only defined here for n = 3, got n = {0}")]
    UnsupportedSize(usize),

    #[error("training set needs both classes present")]
    SingleClass,

    #[error("need at least {needed} samples per class for {k} folds, got {got}")]
    TooFewSamples { needed: usize, k: usize, got: usize },

    #[error("OSC parse error at byte {offset}: {reason}")]
    Osc { offset: usize, reason: &'static str },

    #[error("model does not match window: {0}")]
    ModelMismatch(String),
}
