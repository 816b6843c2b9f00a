//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_height}x{expected_width}, got {height}x{width}")]
    DimensionMismatch {
        expected_height: usize,
        expected_width: usize,
        height: usize,
        width: usize,
    },

    #[error("data length {got} does not match {height}x{width}")]
    DataLength {
        height: usize,
        width: usize,
        got: usize,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("displacement magnitude {magnitude} px exceeds the 15 px range cap")]
    OutOfRange { magnitude: f64 },

    #[error("match window around ({x}, {y}) does not fit inside the rasters")]
    OutOfBounds { x: usize, y: usize },

    #[error("image {height}x{width} is smaller than the required {min_side} px per side")]
    ImageTooSmall {
        height: usize,
        width: usize,
        min_side: usize,
    },

    #[error("sequence of length {got} is too short (need at least {needed})")]
    TooShort { needed: usize, got: usize },

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("estimator failed at refinement iteration {iteration}: {source}")]
    EstimatorFailure {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("mask selects no usable pixels")]
    EmptyMask,

    #[error("profile line leaves the field bounds")]
    LineOutOfBounds,

    #[error("bad magic bytes (not a defkit container)")]
    BadMagic,

    #[error("file truncated or trailing bytes")]
    Truncated,

    #[error("dimension {side} outside the supported [1, 65535] range")]
    DimensionOverflow { side: u64 },

    #[error("container holds {got} component(s), expected {expected}")]
    ComponentMismatch { expected: u8, got: u8 },

    #[error("malformed PGM: {0}")]
    BadPgm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether this is an I/O-level failure (unreadable/corrupt file) as
    /// opposed to a validation failure of otherwise well-formed inputs.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::BadMagic
                | Error::Truncated
                | Error::DimensionOverflow { .. }
                | Error::ComponentMismatch { .. }
                | Error::BadPgm(_)
        )
    }
}
