use super::Image;
use crate::error::{Error, Result};

pub const DEFAULT_PATCH_SIZE: usize = 512;
pub const DEFAULT_OVERLAP: usize = 128;

/// A single-channel window of a larger image.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub offset_y: usize,
    pub offset_x: usize,
    pub data: Image,
}

/// Patch start positions along one axis.
///
/// Offsets advance by `patch - overlap`; the last one is clamped to `dim - patch`
/// so no patch extends past the border. Axes no longer than `patch` get a single
/// offset at 0.
pub fn tile_offsets(dim: usize, patch: usize, overlap: usize) -> Vec<usize> {
    assert!(patch > overlap, "patch size must exceed overlap");
    if dim <= patch {
        return vec![0];
    }
    let stride = patch - overlap;
    let mut offsets = vec![0];
    let mut off = 0;
    while off + patch < dim {
        off += stride;
        if off + patch >= dim {
            offsets.push(dim - patch);
            break;
        }
        offsets.push(off);
    }
    offsets
}

/// Cuts a single-channel image into overlapping patches (row-major patch order).
pub fn tile(img: &Image, patch_size: usize, overlap: usize) -> Result<Vec<Patch>> {
    img.ensure_single_channel("tile")?;
    if patch_size <= overlap {
        return Err(Error::InvalidArgument(format!(
            "patch size {patch_size} must exceed overlap {overlap}"
        )));
    }
    let ph = patch_size.min(img.height());
    let pw = patch_size.min(img.width());
    let mut patches = Vec::new();
    for oy in tile_offsets(img.height(), patch_size, overlap) {
        for ox in tile_offsets(img.width(), patch_size, overlap) {
            patches.push(Patch {
                offset_y: oy,
                offset_x: ox,
                data: img.crop(oy, ox, ph, pw)?,
            });
        }
    }
    Ok(patches)
}

/// Reassembles patches into a `height`×`width` image, averaging overlaps.
pub fn stitch(patches: &[Patch], height: usize, width: usize) -> Result<Image> {
    let mut sum = vec![0.0f64; height * width];
    let mut count = vec![0u32; height * width];
    for (i, p) in patches.iter().enumerate() {
        p.data.ensure_single_channel("stitch")?;
        let (ph, pw) = (p.data.height(), p.data.width());
        if p.offset_y + ph > height || p.offset_x + pw > width {
            return Err(Error::DimensionMismatch(format!(
                "patch {i} ({ph}x{pw} at {}, {}) exceeds the {height}x{width} target",
                p.offset_y, p.offset_x
            )));
        }
        let src = p.data.data();
        for y in 0..ph {
            let row = (p.offset_y + y) * width + p.offset_x;
            for x in 0..pw {
                sum[row + x] += src[y * pw + x] as f64;
                count[row + x] += 1;
            }
        }
    }
    if let Some(idx) = count.iter().position(|&c| c == 0) {
        return Err(Error::Uncovered {
            y: idx / width,
            x: idx % width,
        });
    }
    let data = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| (s / c as f64) as f32)
        .collect();
    Image::new(height, width, 1, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_match_stride_and_clamp() {
        assert_eq!(tile_offsets(512, 512, 128), vec![0]);
        assert_eq!(tile_offsets(1024, 512, 128), vec![0, 384, 512]);
        assert_eq!(tile_offsets(600, 512, 128), vec![0, 88]);
        assert_eq!(tile_offsets(100, 512, 128), vec![0]);
        assert_eq!(tile_offsets(896, 512, 128), vec![0, 384]);
    }

    #[test]
    fn patch_counts() {
        let img = Image::zeros(1024, 1024, 1);
        assert_eq!(tile(&img, 512, 128).unwrap().len(), 9);
        let img = Image::zeros(600, 600, 1);
        assert_eq!(tile(&img, 512, 128).unwrap().len(), 4);
        let img = Image::zeros(512, 512, 1);
        let p = tile(&img, 512, 128).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].offset_y, p[0].offset_x), (0, 0));
    }

    #[test]
    fn small_image_is_one_whole_patch() {
        let img = Image::from_fn(40, 70, |y, x| (y * 70 + x) as f32);
        let p = tile(&img, 512, 128).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].data, img);
    }

    #[test]
    fn overlap_is_averaged() {
        let a = Patch {
            offset_y: 0,
            offset_x: 0,
            data: Image::new(1, 2, 1, vec![0.2, 0.2]).unwrap(),
        };
        let b = Patch {
            offset_y: 0,
            offset_x: 1,
            data: Image::new(1, 2, 1, vec![0.4, 0.4]).unwrap(),
        };
        let out = stitch(&[a, b], 1, 3).unwrap();
        assert_eq!(out.data()[0], 0.2);
        assert!((out.data()[1] - 0.3).abs() < 1e-7);
        assert_eq!(out.data()[2], 0.4);
    }

    #[test]
    fn uncovered_pixel_is_named() {
        let a = Patch {
            offset_y: 0,
            offset_x: 0,
            data: Image::zeros(2, 2, 1),
        };
        match stitch(&[a], 3, 2) {
            Err(Error::Uncovered { y, x }) => assert_eq!((y, x), (2, 0)),
            other => panic!("expected uncovered error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_1024() {
        let img = Image::from_fn(1024, 1024, |y, x| ((y * 31 + x * 17) % 251) as f32 / 250.0);
        let out = stitch(&tile(&img, 512, 128).unwrap(), 1024, 1024).unwrap();
        let max = img
            .data()
            .iter()
            .zip(out.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max <= 1e-6);
    }
}
