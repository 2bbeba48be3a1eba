//! Numeric core for synthesizing low-light image corpora and for the
//! lightweight vision blocks that consume them.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO:
//!
//! - [`image`] / [`stats`]: raster types, per-channel statistics, corpus summaries.
//! - [`truncnorm`] / [`degrade`]: statistics-driven illumination degradation with
//!   color-ratio drift correction.
//! - [`tensor`]: a small N-C-H-W kernel set with hand-written backward passes and a
//!   finite-difference checker.
//! - [`fslconv`], [`snir`], [`lapm`]: the two-stage separable conv block, gated
//!   nearest upsampling, and the photoreceptive mask branch.
//! - [`cost`]: exact FLOPs/MACs accounting for standard, grouped and split convolutions.
#![no_std]
// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cost;
pub mod degrade;
pub mod error;
pub mod fslconv;
pub mod image;
pub mod lapm;
pub mod snir;
pub mod stats;
pub mod tensor;
pub mod truncnorm;

pub use error::{Error, Result};
pub use image::{GrayPlane, RgbFloatImage, RgbImage};
pub use stats::{ChannelStats, ChannelStatsSummary, ChannelSummary};
pub use tensor::Tensor;
