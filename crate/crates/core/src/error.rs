use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("image has no pixels")]
    EmptyImage,

    #[error("no per-image statistics supplied")]
    EmptyCorpus,

    #[error("buffer holds {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },

    #[error("pixel value {value} outside the unit interval")]
    NotUnitInterval { value: f64 },

    #[error("truncation bounds inverted: lower {lower} > upper {upper}")]
    InvertedBounds { lower: f64, upper: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{groups} groups do not divide channels c_in={c_in}, c_out={c_out}")]
    GroupDivisibility { groups: u64, c_in: u64, c_out: u64 },

    #[error("image {width}x{height} too small for {levels} pyramid levels (need at least {min_side}x{min_side})")]
    ImageTooSmall { width: usize, height: usize, levels: u32, min_side: usize },

    #[error("layer {index}: {reason}")]
    InconsistentChain { index: usize, reason: String },
}
