use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ssim::{ssim, SSIM_WINDOW};
use crate::error::{Error, Result};
use crate::image::{downsample2, read_raw_float, Image};
use crate::nn::{conv_forward, ConvShape, Tensor};

/// A perceptual distance: lower means more similar, zero for identical inputs.
pub trait PerceptualBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Distance between two single-channel images of equal size.
    fn distance(&self, a: &Image, b: &Image) -> Result<f64>;
}

/// Mean of `1 - SSIM` over up to three dyadic scales.
///
/// Scales whose smaller side drops below the SSIM window are skipped, so small images
/// are compared on fewer scales. An image too small for even the finest scale is an error.
#[derive(Clone, Copy, Debug, Default)]
pub struct MultiScaleSsim;

impl MultiScaleSsim {
    pub const SCALES: usize = 3;
}

impl PerceptualBackend for MultiScaleSsim {
    fn name(&self) -> &str {
        "multiscale-ssim"
    }

    fn distance(&self, a: &Image, b: &Image) -> Result<f64> {
        a.ensure_same_shape(b)?;
        a.ensure_single_channel("perceptual distance")?;
        let (mut pa, mut pb) = (a.clone(), b.clone());
        let mut total = 0.0;
        let mut used = 0usize;
        for scale in 0..Self::SCALES {
            if pa.height().min(pa.width()) < SSIM_WINDOW {
                break;
            }
            total += 1.0 - ssim(&pa, &pb)?;
            used += 1;
            if scale + 1 < Self::SCALES {
                pa = downsample2(&pa);
                pb = downsample2(&pb);
            }
        }
        if used == 0 {
            return Err(Error::TooSmall(format!(
                "perceptual distance needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
                a.height(),
                a.width()
            )));
        }
        Ok(total / used as f64)
    }
}

/// One convolution of the learned feature extractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    layers: Vec<LayerShape>,
}

/// Feature-space distance with convolution weights loaded from disk.
///
/// The weight file is a raw-float container holding one flat vector; each layer takes
/// `out*in*k*k` weights in `[out][in][ky][kx]` order followed by `out` biases. The layer
/// list lives in a JSON sidecar named `<weights>.json`.
#[derive(Clone, Debug)]
pub struct LearnedBackend {
    layers: Vec<ConvShape>,
    params: Vec<f32>,
}

const FEATURE_EPS: f32 = 1e-10;

impl LearnedBackend {
    pub fn new(layers: &[LayerShape], params: Vec<f32>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Backend("no layers declared".into()));
        }
        let mut expect_in = 1;
        let mut shapes = Vec::with_capacity(layers.len());
        for (i, l) in layers.iter().enumerate() {
            if l.in_channels != expect_in {
                return Err(Error::Backend(format!(
                    "layer {i} expects {} input channels, previous layer yields {expect_in}",
                    l.in_channels
                )));
            }
            if l.kernel_size % 2 == 0 || l.stride == 0 || l.out_channels == 0 {
                return Err(Error::Backend(format!(
                    "layer {i} has an invalid shape {l:?}"
                )));
            }
            shapes.push(ConvShape::new(
                l.in_channels,
                l.out_channels,
                l.kernel_size,
                l.stride,
            ));
            expect_in = l.out_channels;
        }
        let needed: usize = shapes.iter().map(ConvShape::param_len).sum();
        if needed != params.len() {
            return Err(Error::Backend(format!(
                "layers need {needed} parameters, weight file holds {}",
                params.len()
            )));
        }
        Ok(Self {
            layers: shapes,
            params,
        })
    }

    pub fn sidecar_path(weights: &Path) -> PathBuf {
        let mut name = weights.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }

    pub fn load(weights: impl AsRef<Path>) -> Result<Self> {
        let weights = weights.as_ref();
        let bytes = std::fs::read(weights).map_err(|e| Error::io(weights, e))?;
        let container = read_raw_float(&bytes)
            .map_err(|e| Error::Backend(format!("{}: {e}", weights.display())))?;
        let sidecar_path = Self::sidecar_path(weights);
        let text =
            std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::Backend(format!("{}: {e}", sidecar_path.display())))?;
        Self::new(&sidecar.layers, container.into_data())
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        self.layers
            .iter()
            .map(|s| LayerShape {
                in_channels: s.in_channels,
                out_channels: s.out_channels,
                kernel_size: s.kernel,
                stride: s.stride,
            })
            .collect()
    }

    fn features(&self, img: &Image) -> Vec<Tensor> {
        let mut scratch = Vec::new();
        let mut x = Tensor::from_vec(1, img.height(), img.width(), img.data().to_vec());
        let mut out = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for shape in &self.layers {
            let weight = &self.params[offset..offset + shape.weight_len()];
            let bias = &self.params[offset + shape.weight_len()..offset + shape.param_len()];
            offset += shape.param_len();
            x = conv_forward(&x, shape, weight, bias, &mut scratch);
            x.data.iter_mut().for_each(|v| *v = v.max(0.0));
            out.push(unit_normalize(&x));
        }
        out
    }
}

/// Scales each pixel's channel vector to unit length.
fn unit_normalize(t: &Tensor) -> Tensor {
    let plane = t.plane();
    let mut out = t.clone();
    for p in 0..plane {
        let norm = (0..t.channels)
            .map(|c| t.data[c * plane + p].powi(2))
            .sum::<f32>()
            .sqrt()
            + FEATURE_EPS;
        for c in 0..t.channels {
            out.data[c * plane + p] /= norm;
        }
    }
    out
}

impl PerceptualBackend for LearnedBackend {
    fn name(&self) -> &str {
        "learned"
    }

    fn distance(&self, a: &Image, b: &Image) -> Result<f64> {
        a.ensure_same_shape(b)?;
        a.ensure_single_channel("perceptual distance")?;
        if a == b {
            return Ok(0.0);
        }
        let (fa, fb) = (self.features(a), self.features(b));
        let mut total = 0.0;
        for (ta, tb) in fa.iter().zip(&fb) {
            let plane = ta.plane();
            let mut sum = 0.0f64;
            for (x, y) in ta.data.iter().zip(&tb.data) {
                let d = (x - y) as f64;
                sum += d * d;
            }
            total += sum / plane as f64;
        }
        Ok(total / fa.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::write_raw_float;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;

    fn phantom() -> Image {
        Image::from_fn(48, 48, |y, x| {
            let (dy, dx) = (y as f32 - 24.0, x as f32 - 20.0);
            if dy * dy + dx * dx < 150.0 {
                0.8
            } else {
                0.2 + 0.004 * x as f32
            }
        })
    }

    fn noisy(img: &Image, sigma: f32, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        img.map(|v| v + rng.sample(normal))
    }

    fn small_learned() -> LearnedBackend {
        let layers = [
            LayerShape {
                in_channels: 1,
                out_channels: 4,
                kernel_size: 3,
                stride: 1,
            },
            LayerShape {
                in_channels: 4,
                out_channels: 6,
                kernel_size: 3,
                stride: 2,
            },
        ];
        let n: usize = 4 * 9 + 4 + 6 * 4 * 9 + 6;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = (0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect();
        LearnedBackend::new(&layers, params).unwrap()
    }

    #[test]
    fn default_backend_identity_symmetry_monotonicity() {
        let clean = phantom();
        let weak = noisy(&clean, 0.02, 1);
        let strong = noisy(&clean, 0.2, 1);
        let backend = MultiScaleSsim;
        assert_eq!(backend.distance(&clean, &clean).unwrap(), 0.0);
        let dw = backend.distance(&clean, &weak).unwrap();
        let ds = backend.distance(&clean, &strong).unwrap();
        assert!(ds > dw && dw > 0.0);
        assert_eq!(backend.distance(&strong, &clean).unwrap(), ds);
    }

    #[test]
    fn default_backend_uses_available_scales() {
        // 24x24 admits scales 24 and 12 only
        let a = Image::from_fn(24, 24, |y, x| ((y * 5 + x * 3) % 11) as f32 / 11.0);
        let b = Image::from_fn(24, 24, |y, x| ((y * 7 + x) % 5) as f32 / 5.0);
        let expected =
            (2.0 - ssim(&a, &b).unwrap() - ssim(&downsample2(&a), &downsample2(&b)).unwrap()) / 2.0;
        assert!((MultiScaleSsim.distance(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!(MultiScaleSsim
            .distance(&Image::zeros(8, 30, 1), &Image::zeros(8, 30, 1))
            .is_err());
    }

    #[test]
    fn learned_backend_properties() {
        let backend = small_learned();
        let clean = phantom();
        let weak = noisy(&clean, 0.02, 2);
        let strong = noisy(&clean, 0.3, 2);
        assert_eq!(backend.distance(&clean, &clean).unwrap(), 0.0);
        let ds = backend.distance(&clean, &strong).unwrap();
        assert!(ds > backend.distance(&clean, &weak).unwrap());
        assert!((backend.distance(&strong, &clean).unwrap() - ds).abs() < 1e-12);
    }

    #[test]
    fn unit_normalized_features() {
        let t = Tensor::from_vec(2, 1, 2, vec![3.0, 0.0, 4.0, 0.0]);
        let n = unit_normalize(&t);
        assert!((n.data[0] - 0.6).abs() < 1e-6 && (n.data[2] - 0.8).abs() < 1e-6);
        assert_eq!(n.data[1], 0.0);
    }

    #[test]
    fn learned_backend_round_trips_through_files() {
        let backend = small_learned();
        let dir = tempfile::tempdir().unwrap();
        let weights = dir.path().join("features.adipf");
        let params = Image::new(1, backend.params.len(), 1, backend.params.clone()).unwrap();
        std::fs::write(&weights, write_raw_float(&params)).unwrap();
        let sidecar = serde_json::to_string(&Sidecar {
            layers: backend.layer_shapes(),
        })
        .unwrap();
        std::fs::write(LearnedBackend::sidecar_path(&weights), sidecar).unwrap();
        let loaded = LearnedBackend::load(&weights).unwrap();
        let (a, b) = (phantom(), noisy(&phantom(), 0.1, 9));
        assert_eq!(
            loaded.distance(&a, &b).unwrap(),
            backend.distance(&a, &b).unwrap()
        );
    }

    #[test]
    fn learned_backend_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let weights = dir.path().join("w.adipf");
        assert!(LearnedBackend::load(&weights).is_err());
        let params = Image::new(1, 5, 1, vec![0.0; 5]).unwrap();
        std::fs::write(&weights, write_raw_float(&params)).unwrap();
        assert!(LearnedBackend::load(&weights).is_err());
        std::fs::write(
            LearnedBackend::sidecar_path(&weights),
            r#"{"layers":[{"in_channels":1,"out_channels":1,"kernel_size":3,"stride":1}]}"#,
        )
        .unwrap();
        assert!(matches!(
            LearnedBackend::load(&weights),
            Err(Error::Backend(_))
        ));
        let chained = [
            LayerShape {
                in_channels: 1,
                out_channels: 2,
                kernel_size: 1,
                stride: 1,
            },
            LayerShape {
                in_channels: 3,
                out_channels: 2,
                kernel_size: 1,
                stride: 1,
            },
        ];
        assert!(LearnedBackend::new(&chained, vec![0.0; 4 + 8]).is_err());
    }
}
