//! Deep-image-prior denoising with transfer of architecture and stopping-point
//! settings from a calibration store.

pub mod calibration;
pub mod dip;
pub mod error;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
pub use image::Image;
