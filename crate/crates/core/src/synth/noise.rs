use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Poisson shot noise plus Gaussian read noise, averaged over `frames` acquisitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub gaussian_sigma: f64,
    /// Photons collected at intensity 1.0; zero disables shot noise.
    pub poisson_gain: f64,
    pub frames: u32,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            gaussian_sigma: sigma,
            poisson_gain: 0.0,
            frames: 1,
        }
    }

    pub fn with_frames(self, frames: u32) -> Self {
        Self { frames, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(Error::InvalidArgument(
                "gaussian_sigma must be non-negative".into(),
            ));
        }
        if !(self.poisson_gain >= 0.0 && self.poisson_gain.is_finite()) {
            return Err(Error::InvalidArgument(
                "poisson_gain must be non-negative".into(),
            ));
        }
        if self.frames == 0 {
            return Err(Error::InvalidArgument("frames must be at least 1".into()));
        }
        Ok(())
    }
}

/// Averages `model.frames` independently corrupted copies of `clean`, clamped to [0, 1].
pub fn apply_noise(clean: &Image, model: &NoiseModel, seed: u64) -> Result<Image> {
    model.validate()?;
    if model.gaussian_sigma == 0.0 && model.poisson_gain == 0.0 {
        return Ok(clean.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let read = Normal::new(0.0, model.gaussian_sigma)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let frames = model.frames as f64;
    let mut acc = vec![0.0f64; clean.data().len()];
    for _ in 0..model.frames {
        for (a, &v) in acc.iter_mut().zip(clean.data()) {
            let v = v as f64;
            let shot = if model.poisson_gain > 0.0 && v > 0.0 {
                let lambda = v * model.poisson_gain;
                let counts: f64 = rng.sample(Poisson::new(lambda).expect("positive rate"));
                counts / model.poisson_gain
            } else {
                v
            };
            *a += (shot + rng.sample(read)) / frames;
        }
    }
    let (h, w, c) = clean.dims();
    Image::new(
        h,
        w,
        c,
        acc.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
    )
}
