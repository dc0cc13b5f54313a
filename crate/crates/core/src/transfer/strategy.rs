use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::calibration::GroupKey;
use crate::error::{Error, Result};
use crate::image::ImageMeta;

/// Which metadata restricts the candidate calibration pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    Microscope,
    Specimen,
    MicroscopeSpecimen,
}

impl Scope {
    const CHAIN: [Scope; 4] = [
        Scope::MicroscopeSpecimen,
        Scope::Microscope,
        Scope::Specimen,
        Scope::All,
    ];

    /// This scope followed by the wider scopes tried when metadata is unknown.
    pub fn fallback_chain(self) -> &'static [Scope] {
        let at = Self::CHAIN.iter().position(|&s| s == self).expect("listed");
        &Self::CHAIN[at..]
    }

    /// The group an image falls into under this scope; `None` if a required field is unknown.
    pub fn group_key(self, meta: &ImageMeta) -> Option<GroupKey> {
        let microscope = meta.microscope.is_known().then_some(meta.microscope);
        let specimen = meta.specimen_known().then(|| meta.specimen.clone());
        match self {
            Scope::All => Some(GroupKey::global()),
            Scope::Microscope => microscope.map(GroupKey::microscope),
            Scope::Specimen => specimen.map(GroupKey::specimen),
            Scope::MicroscopeSpecimen => Some(GroupKey::both(microscope?, specimen?)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::Microscope => "microscope",
            Scope::Specimen => "specimen",
            Scope::MicroscopeSpecimen => "microscope+specimen",
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Scope::All),
            "microscope" => Ok(Scope::Microscope),
            "specimen" => Ok(Scope::Specimen),
            "microscope+specimen" | "specimen+microscope" => Ok(Scope::MicroscopeSpecimen),
            other => Err(Error::InvalidArgument(format!("unknown scope `{other}`"))),
        }
    }
}

/// Measure used to find the most similar calibration image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimilarityKind {
    Mae,
    Mse,
    Psnr,
    Ssim,
    Perceptual,
    MeanGradient,
    Embedding,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 7] = [
        SimilarityKind::Mae,
        SimilarityKind::Mse,
        SimilarityKind::Psnr,
        SimilarityKind::Ssim,
        SimilarityKind::Perceptual,
        SimilarityKind::MeanGradient,
        SimilarityKind::Embedding,
    ];

    /// PSNR and SSIM are similarities; every other kind is a distance.
    pub fn higher_is_closer(self) -> bool {
        matches!(self, SimilarityKind::Psnr | SimilarityKind::Ssim)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityKind::Mae => "mae",
            SimilarityKind::Mse => "mse",
            SimilarityKind::Psnr => "psnr",
            SimilarityKind::Ssim => "ssim",
            SimilarityKind::Perceptual => "perceptual",
            SimilarityKind::MeanGradient => "mean_gradient",
            SimilarityKind::Embedding => "embedding",
        }
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown similarity `{s}`")))
    }
}

/// How an unseen image is matched to the calibration store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransferStrategy {
    /// The stored optimum of the image's metadata group.
    GroupOnly(Scope),
    /// The optimum of the most similar calibration image within the scoped pool.
    MetricBased {
        similarity: SimilarityKind,
        scope: Scope,
    },
}

impl Default for TransferStrategy {
    fn default() -> Self {
        TransferStrategy::GroupOnly(Scope::MicroscopeSpecimen)
    }
}

impl TransferStrategy {
    pub fn scope(self) -> Scope {
        match self {
            TransferStrategy::GroupOnly(s) | TransferStrategy::MetricBased { scope: s, .. } => s,
        }
    }
}

impl fmt::Display for TransferStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransferStrategy::GroupOnly(scope) => write!(f, "group:{}", scope.as_str()),
            TransferStrategy::MetricBased { similarity, scope } => {
                write!(f, "metric:{}@{}", similarity.as_str(), scope.as_str())
            }
        }
    }
}

/// Parses `group:<scope>` or `metric:<similarity>@<scope>` (scope defaults to `all`).
impl FromStr for TransferStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(scope) = s.strip_prefix("group:") {
            return Ok(TransferStrategy::GroupOnly(scope.parse()?));
        }
        if let Some(rest) = s.strip_prefix("metric:") {
            let (kind, scope) = rest.split_once('@').unwrap_or((rest, "all"));
            return Ok(TransferStrategy::MetricBased {
                similarity: kind.parse()?,
                scope: scope.parse()?,
            });
        }
        Err(Error::InvalidArgument(format!(
            "unknown strategy `{s}` (expected group:<scope> or metric:<measure>@<scope>)"
        )))
    }
}

impl Serialize for TransferStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransferStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Microscope;

    #[test]
    fn strategy_strings() {
        let cases = [
            (
                "group:microscope+specimen",
                TransferStrategy::GroupOnly(Scope::MicroscopeSpecimen),
            ),
            ("group:all", TransferStrategy::GroupOnly(Scope::All)),
            (
                "metric:mse@all",
                TransferStrategy::MetricBased {
                    similarity: SimilarityKind::Mse,
                    scope: Scope::All,
                },
            ),
            (
                "metric:embedding@microscope",
                TransferStrategy::MetricBased {
                    similarity: SimilarityKind::Embedding,
                    scope: Scope::Microscope,
                },
            ),
        ];
        for (text, strategy) in cases {
            assert_eq!(text.parse::<TransferStrategy>().unwrap(), strategy);
            assert_eq!(strategy.to_string(), text);
        }
        assert_eq!(
            "metric:ssim".parse::<TransferStrategy>().unwrap(),
            TransferStrategy::MetricBased {
                similarity: SimilarityKind::Ssim,
                scope: Scope::All
            }
        );
        for bad in [
            "baseline",
            "group:lab",
            "metric:lpips@all",
            "metric:mse@lab",
        ] {
            assert!(bad.parse::<TransferStrategy>().is_err(), "{bad}");
        }
    }

    #[test]
    fn scope_keys_need_known_fields() {
        let full = ImageMeta::new("x", Microscope::Confocal, "dots");
        assert_eq!(
            Scope::MicroscopeSpecimen.group_key(&full),
            Some(GroupKey::both(Microscope::Confocal, "dots"))
        );
        let partial = ImageMeta::new("x", Microscope::Confocal, "unknown");
        assert_eq!(Scope::MicroscopeSpecimen.group_key(&partial), None);
        assert_eq!(Scope::Specimen.group_key(&partial), None);
        assert_eq!(Scope::All.group_key(&partial), Some(GroupKey::global()));
        assert_eq!(
            Scope::Microscope.fallback_chain(),
            &[Scope::Microscope, Scope::Specimen, Scope::All]
        );
    }
}
