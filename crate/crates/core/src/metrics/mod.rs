//! Full-reference quality measures, the pluggable perceptual distance and the
//! PSNR/perceptual rank-sum selector.

mod perceptual;
mod rank;
mod ssim;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use perceptual::{LayerShape, LearnedBackend, MultiScaleSsim, PerceptualBackend};
pub use rank::{fractional_ranks, rank_sum_select, rank_sums};
pub use ssim::{ssim, SSIM_WINDOW};

use crate::error::{Error, Result};
use crate::image::{mean_gradient, Image};

fn diffs<'a>(a: &'a Image, b: &'a Image) -> Result<impl Iterator<Item = f64> + 'a> {
    a.ensure_same_shape(b)?;
    if a.data().is_empty() {
        return Err(Error::Empty("image has no pixels".into()));
    }
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x as f64 - y as f64))
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    let n = a.data().len() as f64;
    Ok(diffs(a, b)?.map(|d| d * d).sum::<f64>() / n)
}

pub fn mae(a: &Image, b: &Image) -> Result<f64> {
    let n = a.data().len() as f64;
    Ok(diffs(a, b)?.map(f64::abs).sum::<f64>() / n)
}

/// Peak signal-to-noise ratio for a unit dynamic range; `f64::INFINITY` when the images are equal.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Signed difference of mean gradients, positive when `a` is busier than `reference`.
pub fn mean_gradient_diff(a: &Image, reference: &Image) -> Result<f64> {
    a.ensure_same_shape(reference)?;
    Ok(mean_gradient(a)? - mean_gradient(reference)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Mae,
    Mse,
    Psnr,
    Ssim,
    Perceptual,
    MeanGradientDiff,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Mae,
        MetricKind::Mse,
        MetricKind::Psnr,
        MetricKind::Ssim,
        MetricKind::Perceptual,
        MetricKind::MeanGradientDiff,
    ];

    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::Psnr | MetricKind::Ssim)
    }

    /// Value on a scale where smaller is always better.
    pub fn loss_value(self, value: f64) -> f64 {
        match self {
            MetricKind::Psnr | MetricKind::Ssim => -value,
            MetricKind::MeanGradientDiff => value.abs(),
            _ => value,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Mae => "mae",
            MetricKind::Mse => "mse",
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
            MetricKind::Perceptual => "perceptual",
            MetricKind::MeanGradientDiff => "mean_gradient_diff",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

/// Every measure for one (candidate, reference) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub mae: f64,
    pub mse: f64,
    #[serde(with = "psnr_value")]
    pub psnr: f64,
    pub ssim: f64,
    pub perceptual: f64,
    pub mean_gradient_diff: f64,
}

impl MetricReport {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Mae => self.mae,
            MetricKind::Mse => self.mse,
            MetricKind::Psnr => self.psnr,
            MetricKind::Ssim => self.ssim,
            MetricKind::Perceptual => self.perceptual,
            MetricKind::MeanGradientDiff => self.mean_gradient_diff,
        }
    }
}

/// Computes every measure of `candidate` against `reference`; multichannel images are
/// scored per channel and averaged for SSIM, perceptual and mean-gradient terms.
pub fn evaluate(
    candidate: &Image,
    reference: &Image,
    backend: &dyn PerceptualBackend,
) -> Result<MetricReport> {
    candidate.ensure_same_shape(reference)?;
    let mse_v = mse(candidate, reference)?;
    let parts_a = crate::image::split_channels(candidate);
    let parts_b = crate::image::split_channels(reference);
    let c = parts_a.len() as f64;
    let mut ssim_v = 0.0;
    let mut perceptual_v = 0.0;
    let mut grad_v = 0.0;
    for (a, b) in parts_a.iter().zip(&parts_b) {
        ssim_v += ssim(a, b)? / c;
        perceptual_v += backend.distance(a, b)? / c;
        grad_v += mean_gradient_diff(a, b)? / c;
    }
    Ok(MetricReport {
        mae: mae(candidate, reference)?,
        mse: mse_v,
        psnr: psnr_from_mse(mse_v),
        ssim: ssim_v,
        perceptual: perceptual_v,
        mean_gradient_diff: grad_v,
    })
}

/// Serializes infinite PSNR as the string `"inf"`; JSON has no infinity literal.
pub mod psnr_value {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                if v == "inf" {
                    Ok(f64::INFINITY)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f32]) -> Image {
        Image::new(1, v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn hand_computed_errors() {
        assert_eq!(mse(&row(&[0.0, 0.0]), &row(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(mae(&row(&[0.0, 0.0]), &row(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(mse(&row(&[0.0, 1.0]), &row(&[0.5, 0.5])).unwrap(), 0.25);
        assert_eq!(mae(&row(&[0.0, 1.0]), &row(&[0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(mse(&row(&[0.3, 0.7]), &row(&[0.3, 0.7])).unwrap(), 0.0);
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr(&row(&[0.2]), &row(&[0.2])).unwrap(), f64::INFINITY);
        assert_eq!(psnr_from_mse(1.0), 0.0);
        assert!((psnr_from_mse(0.25) - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(mse(&row(&[0.0, 1.0]), &row(&[0.0])).is_err());
        assert!(psnr(&row(&[0.0, 1.0]), &Image::zeros(1, 2, 2)).is_err());
    }

    #[test]
    fn orientation() {
        assert!(MetricKind::Psnr.higher_is_better());
        assert!(MetricKind::Ssim.higher_is_better());
        for k in [
            MetricKind::Mae,
            MetricKind::Mse,
            MetricKind::Perceptual,
            MetricKind::MeanGradientDiff,
        ] {
            assert!(!k.higher_is_better());
        }
        assert_eq!(MetricKind::MeanGradientDiff.loss_value(-0.3), 0.3);
        assert_eq!("psnr".parse::<MetricKind>().unwrap(), MetricKind::Psnr);
        assert!("lpips".parse::<MetricKind>().is_err());
    }

    #[test]
    fn gradient_difference_sign() {
        let flat = Image::from_fn(8, 8, |_, _| 0.5);
        let stripes = Image::from_fn(8, 8, |_, x| (x % 2) as f32);
        assert!(mean_gradient_diff(&stripes, &flat).unwrap() > 0.0);
        assert!(mean_gradient_diff(&flat, &stripes).unwrap() < 0.0);
        assert_eq!(mean_gradient_diff(&flat, &flat).unwrap(), 0.0);
    }

    #[test]
    fn report_serializes_infinite_psnr_as_string() {
        let report = MetricReport {
            mae: 0.0,
            mse: 0.0,
            psnr: f64::INFINITY,
            ssim: 1.0,
            perceptual: 0.0,
            mean_gradient_diff: 0.0,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains(r#""psnr":"inf""#));
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        let finite = MetricReport {
            psnr: 31.5,
            ..report
        };
        let back: MetricReport =
            serde_json::from_str(&serde_json::to_string(&finite).unwrap()).unwrap();
        assert_eq!(back.psnr, 31.5);
    }

    #[test]
    fn evaluate_identical_images() {
        let img = Image::from_fn(24, 24, |y, x| ((y * 3 + x) % 7) as f32 / 7.0);
        let r = evaluate(&img, &img, &MultiScaleSsim).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        assert_eq!(r.ssim, 1.0);
        assert_eq!(r.perceptual, 0.0);
        assert_eq!(r.get(MetricKind::MeanGradientDiff), 0.0);
    }
}
