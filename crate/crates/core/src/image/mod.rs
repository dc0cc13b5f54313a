//! Image representation and the pixel-level operations every pipeline builds on.
//!
//! Pixel data is stored planar: all of channel 0 row-major, then channel 1, and so on.
//! File containers that interleave channels are converted on load/save.

mod io;
mod meta;
mod ops;
mod tiling;

pub use io::{
    load_image, load_image_any, read_raw_float, save_image, write_raw_float, RAW_FLOAT_MAGIC,
};
pub use meta::{BitDepth, ImageMeta, Microscope};
pub use ops::{
    area_resize, denormalize, downsample2, mean_gradient, merge_channels, normalize,
    split_channels, ChannelRange, NormParams,
};
pub use tiling::{stitch, tile, tile_offsets, Patch, DEFAULT_OVERLAP, DEFAULT_PATCH_SIZE};

use crate::error::{Error, Result};

/// A planar 32-bit float raster with one or more channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    /// Builds an image from planar data, rejecting wrong lengths and non-finite values.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument(
                "image needs at least one channel".into(),
            ));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite pixel value at flat index {pos}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        assert!(channels > 0);
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    /// Single-channel image from a pixel function `f(y, x)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        assert!(
            data.iter().all(|v| v.is_finite()),
            "pixel function produced non-finite values"
        );
        Self {
            height,
            width,
            channels: 1,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels_per_channel(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.pixels_per_channel();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Applies `f` to every value; the result must stay finite.
    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        let data: Vec<f32> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()));
        Self { data, ..*self }
    }

    pub fn clamped(&self, lo: f32, hi: f32) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    pub(crate) fn ensure_single_channel(&self, what: &str) -> Result<()> {
        if self.channels == 1 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} expects a single-channel image, got {} channels",
                self.channels
            )))
        }
    }

    /// Copies the `h`×`w` window at (`y0`, `x0`) of a single-channel image.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Image> {
        self.ensure_single_channel("crop")?;
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::DimensionMismatch(format!(
                "crop {h}x{w} at ({y0}, {x0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            let row = &self.data[y * self.width + x0..y * self.width + x0 + w];
            data.extend_from_slice(row);
        }
        Ok(Image {
            height: h,
            width: w,
            channels: 1,
            data,
        })
    }
}
