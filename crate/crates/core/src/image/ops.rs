use serde::{Deserialize, Serialize};

use super::Image;
use crate::error::{Error, Result};

/// Intensity range of one channel before min-max rescaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min_value: f32,
    pub max_value: f32,
}

/// Per-channel ranges recorded by [`normalize`] so the rescaling can be undone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub channels: Vec<ChannelRange>,
}

/// Rescales every channel to [0, 1] by its own min and max.
///
/// A constant channel maps to all zeros and records `max_value == min_value`.
pub fn normalize(img: &Image) -> (Image, NormParams) {
    let n = img.pixels_per_channel();
    let mut data = Vec::with_capacity(img.data().len());
    let mut ranges = Vec::with_capacity(img.channels());
    for c in 0..img.channels() {
        let ch = img.channel(c);
        let (lo, hi) = ch
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let (lo, hi) = if n == 0 { (0.0, 0.0) } else { (lo, hi) };
        let span = hi - lo;
        if span > 0.0 {
            data.extend(ch.iter().map(|&v| ((v - lo) / span).clamp(0.0, 1.0)));
        } else {
            data.extend(std::iter::repeat_n(0.0, n));
        }
        ranges.push(ChannelRange {
            min_value: lo,
            max_value: hi,
        });
    }
    let (h, w, c) = img.dims();
    (
        Image::new(h, w, c, data).expect("normalized values are finite"),
        NormParams { channels: ranges },
    )
}

/// Inverse of [`normalize`]: `v * (max - min) + min` per channel.
pub fn denormalize(img: &Image, params: &NormParams) -> Result<Image> {
    if params.channels.len() != img.channels() {
        return Err(Error::DimensionMismatch(format!(
            "image has {} channels, normalization parameters describe {}",
            img.channels(),
            params.channels.len()
        )));
    }
    let mut data = Vec::with_capacity(img.data().len());
    for (c, range) in params.channels.iter().enumerate() {
        let span = range.max_value - range.min_value;
        data.extend(img.channel(c).iter().map(|&v| v * span + range.min_value));
    }
    let (h, w, c) = img.dims();
    Image::new(h, w, c, data)
}

/// Mean forward-difference gradient magnitude over the (h-1)×(w-1) interior.
pub fn mean_gradient(img: &Image) -> Result<f64> {
    img.ensure_single_channel("mean_gradient")?;
    let (h, w) = (img.height(), img.width());
    if h < 2 || w < 2 {
        return Err(Error::TooSmall(format!(
            "mean gradient needs at least 2x2 pixels, got {h}x{w}"
        )));
    }
    let px = img.data();
    let mut acc = 0.0f64;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let here = px[y * w + x] as f64;
            let gx = px[y * w + x + 1] as f64 - here;
            let gy = px[(y + 1) * w + x] as f64 - here;
            acc += (gx * gx + gy * gy).sqrt();
        }
    }
    Ok(acc / ((h - 1) * (w - 1)) as f64)
}

pub fn split_channels(img: &Image) -> Vec<Image> {
    let (h, w, _) = img.dims();
    (0..img.channels())
        .map(|c| Image::new(h, w, 1, img.channel(c).to_vec()).expect("channel slice is valid"))
        .collect()
}

pub fn merge_channels(parts: &[Image]) -> Result<Image> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Empty("merge_channels needs at least one image".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::new();
    let mut channels = 0;
    for (i, p) in parts.iter().enumerate() {
        if p.height() != h || p.width() != w {
            return Err(Error::DimensionMismatch(format!(
                "channel image {i} is {}x{}, expected {h}x{w}",
                p.height(),
                p.width()
            )));
        }
        data.extend_from_slice(p.data());
        channels += p.channels();
    }
    Image::new(h, w, channels, data)
}

/// Area-weighted coverage of output cells over input cells along one axis.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let start = o as f64 * scale;
            let end = (o + 1) as f64 * scale;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(src);
            let mut taps = Vec::with_capacity(last - first);
            for i in first..last {
                let overlap = (end.min((i + 1) as f64) - start.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((i, overlap / scale));
                }
            }
            taps
        })
        .collect()
}

/// Resamples every channel to `out_h`×`out_w` by exact area averaging.
pub fn area_resize(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    let (h, w, c) = img.dims();
    if h == 0 || w == 0 || out_h == 0 || out_w == 0 {
        return Err(Error::TooSmall("area_resize needs non-empty images".into()));
    }
    let rows = area_weights(h, out_h);
    let cols = area_weights(w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w * c);
    let mut tmp = vec![0.0f64; out_h * w];
    for ch in 0..c {
        let src = img.channel(ch);
        for (oy, taps) in rows.iter().enumerate() {
            let dst = &mut tmp[oy * w..(oy + 1) * w];
            dst.fill(0.0);
            for &(y, wt) in taps {
                for (d, &s) in dst.iter_mut().zip(&src[y * w..(y + 1) * w]) {
                    *d += wt * s as f64;
                }
            }
        }
        for oy in 0..out_h {
            let row = &tmp[oy * w..(oy + 1) * w];
            for taps in &cols {
                let v: f64 = taps.iter().map(|&(x, wt)| wt * row[x]).sum();
                out.push(v as f32);
            }
        }
    }
    Image::new(out_h, out_w, c, out)
}

/// Halves each axis by averaging 2×2 blocks (trailing odd row/column dropped).
pub fn downsample2(img: &Image) -> Image {
    let (h, w, c) = img.dims();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(oh * ow * c);
    for ch in 0..c {
        let src = img.channel(ch);
        for y in 0..oh {
            for x in 0..ow {
                let s = src[2 * y * w + 2 * x]
                    + src[2 * y * w + 2 * x + 1]
                    + src[(2 * y + 1) * w + 2 * x]
                    + src[(2 * y + 1) * w + 2 * x + 1];
                out.push(s * 0.25);
            }
        }
    }
    Image::new(oh, ow, c, out).expect("downsampled values are finite")
}
