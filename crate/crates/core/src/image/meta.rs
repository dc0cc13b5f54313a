use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acquisition modality of a fluorescence image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Microscope {
    Confocal,
    Widefield,
    TwoPhoton,
    Unknown,
}

impl Microscope {
    pub fn as_str(self) -> &'static str {
        match self {
            Microscope::Confocal => "confocal",
            Microscope::Widefield => "widefield",
            Microscope::TwoPhoton => "two_photon",
            Microscope::Unknown => "unknown",
        }
    }

    pub fn is_known(self) -> bool {
        self != Microscope::Unknown
    }
}

impl fmt::Display for Microscope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Microscope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "confocal" => Ok(Microscope::Confocal),
            "widefield" => Ok(Microscope::Widefield),
            "two_photon" | "twophoton" => Ok(Microscope::TwoPhoton),
            "unknown" | "" => Ok(Microscope::Unknown),
            other => Err(Error::InvalidArgument(format!(
                "unknown microscope type `{other}`"
            ))),
        }
    }
}

/// Storage depth of the source file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
    #[serde(rename = "raw_float")]
    RawFloat,
}

impl BitDepth {
    /// Largest integer code, or `None` for float data.
    pub fn full_scale(self) -> Option<f32> {
        match self {
            BitDepth::Eight => Some(255.0),
            BitDepth::Sixteen => Some(65535.0),
            BitDepth::RawFloat => None,
        }
    }
}

impl fmt::Display for BitDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BitDepth::Eight => "8",
            BitDepth::Sixteen => "16",
            BitDepth::RawFloat => "raw_float",
        })
    }
}

impl FromStr for BitDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "8" => Ok(BitDepth::Eight),
            "16" => Ok(BitDepth::Sixteen),
            "raw_float" | "raw" | "float" => Ok(BitDepth::RawFloat),
            other => Err(Error::InvalidArgument(format!(
                "unknown bit depth `{other}`"
            ))),
        }
    }
}

/// Metadata that drives group-based parameter transfer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub microscope: Microscope,
    pub specimen: String,
    /// Number of averaged frames, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_level: Option<u32>,
    pub source_id: String,
    pub bit_depth: BitDepth,
}

impl ImageMeta {
    pub fn new(
        source_id: impl Into<String>,
        microscope: Microscope,
        specimen: impl Into<String>,
    ) -> Self {
        Self {
            microscope,
            specimen: specimen.into(),
            noise_level: None,
            source_id: source_id.into(),
            bit_depth: BitDepth::RawFloat,
        }
    }

    pub fn specimen_known(&self) -> bool {
        !self.specimen.is_empty() && self.specimen != "unknown"
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_id.is_empty() {
            return Err(Error::InvalidArgument(
                "image metadata needs a non-empty source_id".into(),
            ));
        }
        if self.noise_level == Some(0) {
            return Err(Error::InvalidArgument(
                "noise_level must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
