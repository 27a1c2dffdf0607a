use alloc::string::String;

/// Errors produced by the algorithms in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("image too small: {0}")]
    ImageTooSmall(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("pixel ({x}, {y}) lies on the image border")]
    BorderPixel { x: usize, y: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("empty input: {0}")]
    Empty(String),
    #[error("incompatible features: {0}")]
    IncompatibleFeatures(String),
}

pub type Result<T> = core::result::Result<T, Error>;
