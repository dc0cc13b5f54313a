use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use super::{BitDepth, Image};
use crate::error::{Error, Result};

/// Leading bytes of the raw-float container.
pub const RAW_FLOAT_MAGIC: &[u8; 7] = b"ADIPF1\0";

const HEADER_LEN: usize = RAW_FLOAT_MAGIC.len() + 12;

/// Serializes an image into the raw-float container (channel-last, little endian).
pub fn write_raw_float(img: &Image) -> Vec<u8> {
    let (h, w, c) = img.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + h * w * c * 4);
    out.extend_from_slice(RAW_FLOAT_MAGIC);
    for v in [h, w, c] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let n = h * w;
    for p in 0..n {
        for ch in 0..c {
            out.extend_from_slice(&img.data()[ch * n + p].to_le_bytes());
        }
    }
    out
}

/// Parses the raw-float container.
pub fn read_raw_float(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < HEADER_LEN || &bytes[..RAW_FLOAT_MAGIC.len()] != RAW_FLOAT_MAGIC {
        return Err(Error::UnsupportedFormat("missing raw-float magic".into()));
    }
    let field = |i: usize| {
        let at = RAW_FLOAT_MAGIC.len() + 4 * i;
        u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
    };
    let (h, w, c) = (field(0), field(1), field(2));
    let n = h * w;
    let expected = HEADER_LEN + n * c * 4;
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "raw-float container declares {h}x{w}x{c} ({expected} bytes) but holds {} bytes",
            bytes.len()
        )));
    }
    let mut data = vec![0.0f32; n * c];
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        data[(i % c) * n + i / c] = v;
    }
    Image::new(h, w, c, data)
}

fn decode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn planar_from_interleaved<T: Copy + Into<f32>>(
    raw: &[T],
    h: usize,
    w: usize,
    c: usize,
    scale: f32,
) -> Result<Image> {
    let n = h * w;
    let mut data = vec![0.0f32; n * c];
    for (i, &v) in raw.iter().enumerate() {
        data[(i % c) * n + i / c] = v.into() / scale;
    }
    Image::new(h, w, c, data)
}

/// Loads PNG, TIFF or raw-float files, scaling integer codes by `2^bits - 1`.
pub fn load_image(path: impl AsRef<Path>, bit_depth: BitDepth) -> Result<Image> {
    load_checked(path.as_ref(), Some(bit_depth)).map(|(img, _)| img)
}

/// Like [`load_image`] but accepts whatever depth the file header declares.
pub fn load_image_any(path: impl AsRef<Path>) -> Result<(Image, BitDepth)> {
    load_checked(path.as_ref(), None)
}

fn load_checked(path: &Path, declared: Option<BitDepth>) -> Result<(Image, BitDepth)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mismatch = |found: BitDepth| match declared {
        Some(d) if d != found => Err(Error::BitDepthMismatch {
            declared: d.to_string(),
            found: found.to_string(),
        }),
        _ => Ok(()),
    };
    if bytes.starts_with(RAW_FLOAT_MAGIC) {
        mismatch(BitDepth::RawFloat)?;
        return Ok((read_raw_float(&bytes)?, BitDepth::RawFloat));
    }
    let format = image::guess_format(&bytes).map_err(|_| {
        Error::UnsupportedFormat(format!("{} is not PNG, TIFF or raw-float", path.display()))
    })?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Tiff) {
        return Err(Error::UnsupportedFormat(format!(
            "{format:?} ({})",
            path.display()
        )));
    }
    let decoded =
        image::load_from_memory_with_format(&bytes, format).map_err(|e| decode_err(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let found_depth = match &decoded {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => BitDepth::Eight,
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => BitDepth::Sixteen,
        _ => BitDepth::RawFloat,
    };
    mismatch(found_depth)?;
    let img = match decoded {
        DynamicImage::ImageLuma8(b) => planar_from_interleaved(b.as_raw(), h, w, 1, 255.0),
        DynamicImage::ImageLumaA8(b) => planar_from_interleaved(b.as_raw(), h, w, 2, 255.0),
        DynamicImage::ImageRgb8(b) => planar_from_interleaved(b.as_raw(), h, w, 3, 255.0),
        DynamicImage::ImageRgba8(b) => planar_from_interleaved(b.as_raw(), h, w, 4, 255.0),
        DynamicImage::ImageLuma16(b) => planar_from_interleaved(b.as_raw(), h, w, 1, 65535.0),
        DynamicImage::ImageLumaA16(b) => planar_from_interleaved(b.as_raw(), h, w, 2, 65535.0),
        DynamicImage::ImageRgb16(b) => planar_from_interleaved(b.as_raw(), h, w, 3, 65535.0),
        DynamicImage::ImageRgba16(b) => planar_from_interleaved(b.as_raw(), h, w, 4, 65535.0),
        DynamicImage::ImageRgb32F(b) => planar_from_interleaved(b.as_raw(), h, w, 3, 1.0),
        DynamicImage::ImageRgba32F(b) => planar_from_interleaved(b.as_raw(), h, w, 4, 1.0),
        other => Err(Error::UnsupportedFormat(format!(
            "pixel layout {:?}",
            other.color()
        ))),
    }?;
    Ok((img, found_depth))
}

fn quantize<T: TryFrom<u32>>(v: f32, full_scale: f32) -> T
where
    T::Error: std::fmt::Debug,
{
    let code = (v.clamp(0.0, 1.0) * full_scale).round() as u32;
    T::try_from(code).expect("code within full scale")
}

/// Writes an image; the file extension picks PNG, TIFF or the raw-float container.
///
/// PNG and TIFF output is single-channel grayscale at the requested depth; values are
/// clamped to [0, 1] before quantization.
pub fn save_image(path: impl AsRef<Path>, img: &Image, bit_depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let format = match ext.as_str() {
        "png" => Some(ImageFormat::Png),
        "tif" | "tiff" => Some(ImageFormat::Tiff),
        _ => None,
    };
    let Some(format) = format.filter(|_| bit_depth != BitDepth::RawFloat) else {
        return fs::write(path, write_raw_float(img)).map_err(|e| Error::io(path, e));
    };
    if img.channels() != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{format:?} output supports single-channel images only ({} channels given)",
            img.channels()
        )));
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match bit_depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = img.data().iter().map(|&v| quantize(v, 255.0)).collect();
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).unwrap())
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = img.data().iter().map(|&v| quantize(v, 65535.0)).collect();
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).unwrap())
        }
        BitDepth::RawFloat => unreachable!(),
    };
    dynamic
        .save_with_format(path, format)
        .map_err(|e| decode_err(path, e))
}
