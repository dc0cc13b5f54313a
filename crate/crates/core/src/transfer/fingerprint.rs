use crate::error::Result;
use crate::image::{area_resize, normalize, Image};

/// Side length of the stored fingerprints.
pub const FINGERPRINT_SIZE: usize = 64;

/// Area-averaged, min-max normalized 64×64 copy of `img`; channels are averaged first.
pub fn fingerprint(img: &Image) -> Result<Image> {
    let single = if img.channels() == 1 {
        img.clone()
    } else {
        let n = img.pixels_per_channel();
        let c = img.channels() as f32;
        let mut data = vec![0.0f32; n];
        for ch in 0..img.channels() {
            for (d, &v) in data.iter_mut().zip(img.channel(ch)) {
                *d += v / c;
            }
        }
        Image::new(img.height(), img.width(), 1, data)?
    };
    let resized = area_resize(&single, FINGERPRINT_SIZE, FINGERPRINT_SIZE)?;
    Ok(normalize(&resized).0)
}
