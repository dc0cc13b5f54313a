use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MIN_DEPTH: usize = 4;
pub const MAX_DEPTH: usize = 8;
pub const UNIFORM_WIDTHS: [u32; 6] = [16, 32, 64, 128, 256, 512];
/// Channels tapped from each encoder level when skip links are enabled.
pub const SKIP_CHANNELS: usize = 4;
/// Channels of the fixed random network input.
pub const INPUT_CHANNELS: usize = 32;
pub const MAX_ITERATIONS: usize = 3000;

/// Feature maps per network level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WidthMode {
    /// The same number of feature maps at every level.
    Uniform(u32),
    /// Doubling widths that reach 512 at the deepest level.
    Progressive512,
}

impl fmt::Display for WidthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WidthMode::Uniform(w) => write!(f, "{w}"),
            WidthMode::Progressive512 => f.write_str("v512"),
        }
    }
}

impl FromStr for WidthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "v512" || s == "progressive512" {
            return Ok(WidthMode::Progressive512);
        }
        let w: u32 = s.parse().map_err(|_| {
            Error::InvalidArgument(format!("width `{s}` is neither a number nor v512"))
        })?;
        if !UNIFORM_WIDTHS.contains(&w) {
            return Err(Error::InvalidArgument(format!(
                "uniform width {w} not in {UNIFORM_WIDTHS:?}"
            )));
        }
        Ok(WidthMode::Uniform(w))
    }
}

impl Serialize for WidthMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WidthMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Architecture of one DIP encoder-decoder network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NetworkSpec {
    pub depth: usize,
    pub width: WidthMode,
    pub skip: bool,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(depth: usize, width: WidthMode, skip: bool) -> Self {
        Self {
            depth,
            width,
            skip,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_DEPTH..=MAX_DEPTH).contains(&self.depth) {
            return Err(Error::InvalidArgument(format!(
                "depth {} outside {MIN_DEPTH}..={MAX_DEPTH}",
                self.depth
            )));
        }
        if let WidthMode::Uniform(w) = self.width {
            if !UNIFORM_WIDTHS.contains(&w) {
                return Err(Error::InvalidArgument(format!(
                    "uniform width {w} not in {UNIFORM_WIDTHS:?}"
                )));
            }
        }
        Ok(())
    }

    /// Feature maps per level, shallowest first.
    pub fn level_widths(&self) -> Vec<usize> {
        match self.width {
            WidthMode::Uniform(w) => vec![w as usize; self.depth],
            WidthMode::Progressive512 => (1..=self.depth)
                .map(|j| 1usize << (9 + j - self.depth))
                .collect(),
        }
    }

    /// Skip channels per level (zero when skip links are disabled).
    pub fn skip_channels(&self) -> usize {
        if self.skip {
            SKIP_CHANNELS
        } else {
            0
        }
    }

    /// Spatial multiple the network input must have.
    pub fn size_multiple(&self) -> usize {
        1 << self.depth
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d={} w={} skip={} seed={}",
            self.depth,
            self.width,
            if self.skip { "yes" } else { "no" },
            self.seed
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    depth: usize,
    width_mode: String,
    width: u32,
    skip: bool,
    seed: u64,
}

impl Serialize for NetworkSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (width_mode, width) = match self.width {
            WidthMode::Uniform(w) => ("uniform", w),
            WidthMode::Progressive512 => ("progressive512", 512),
        };
        SpecRepr {
            depth: self.depth,
            width_mode: width_mode.into(),
            width,
            skip: self.skip,
            seed: self.seed,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetworkSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = SpecRepr::deserialize(d)?;
        let width = match r.width_mode.as_str() {
            "uniform" => WidthMode::Uniform(r.width),
            "progressive512" if r.width == 512 => WidthMode::Progressive512,
            "progressive512" => {
                return Err(D::Error::custom(format!(
                    "progressive512 requires width 512, got {}",
                    r.width
                )))
            }
            other => return Err(D::Error::custom(format!("unknown width_mode `{other}`"))),
        };
        let spec = NetworkSpec {
            depth: r.depth,
            width,
            skip: r.skip,
            seed: r.seed,
        };
        spec.validate().map_err(D::Error::custom)?;
        Ok(spec)
    }
}

/// An architecture together with its stopping iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipConfig {
    pub spec: NetworkSpec,
    pub iteration: usize,
}

impl DipConfig {
    pub fn new(spec: NetworkSpec, iteration: usize) -> Self {
        Self { spec, iteration }
    }
}

impl fmt::Display for DipConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} i={}", self.spec, self.iteration)
    }
}

/// Optimization settings for one DIP fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_iterations: usize,
    pub checkpoint_stride: usize,
    pub learning_rate: f32,
    pub input_noise_scale: f32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_iterations: MAX_ITERATIONS,
            checkpoint_stride: 100,
            learning_rate: 0.01,
            input_noise_scale: 0.1,
        }
    }
}

impl RunConfig {
    pub fn with_iterations(self, max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_iterations > MAX_ITERATIONS {
            return Err(Error::InvalidArgument(format!(
                "max_iterations {} outside 1..={MAX_ITERATIONS}",
                self.max_iterations
            )));
        }
        if self.checkpoint_stride == 0
            || !self.max_iterations.is_multiple_of(self.checkpoint_stride)
        {
            return Err(Error::InvalidArgument(format!(
                "checkpoint_stride {} must divide max_iterations {}",
                self.checkpoint_stride, self.max_iterations
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.input_noise_scale >= 0.0 && self.input_noise_scale.is_finite()) {
            return Err(Error::InvalidArgument(
                "input_noise_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }
}
