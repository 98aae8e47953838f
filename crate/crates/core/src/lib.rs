//! Iris recognition with photometric-stereo and texture-based presentation
//! attack detection.

pub mod encoding;
pub mod error;
pub mod fusion;
pub mod imaging;
pub mod metrics;
pub mod normalization;
pub mod pad2d;
pub mod pad3d;
pub mod pipeline;
pub mod segmentation;
pub mod synthgen;

pub use error::{Error, Result};
