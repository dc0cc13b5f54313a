use serde::{Deserialize, Serialize};

use crate::dip::{
    DipConfig, NetworkSpec, RunConfig, WidthMode, MAX_DEPTH, MAX_ITERATIONS, MIN_DEPTH,
    UNIFORM_WIDTHS,
};
use crate::error::{Error, Result};

/// Spacing of the candidate stopping points.
pub const CHECKPOINT_STRIDE: usize = 100;

/// The grid of architectures and stopping points searched during calibration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub depths: Vec<usize>,
    pub widths: Vec<WidthMode>,
    pub skips: Vec<bool>,
    pub checkpoints: Vec<usize>,
}

impl SearchSpace {
    /// All 70 architectures with stopping points 100, 200, ..., 3000.
    pub fn full() -> Self {
        let mut widths: Vec<WidthMode> = UNIFORM_WIDTHS
            .iter()
            .map(|&w| WidthMode::Uniform(w))
            .collect();
        widths.push(WidthMode::Progressive512);
        Self {
            depths: (MIN_DEPTH..=MAX_DEPTH).collect(),
            widths,
            skips: vec![true, false],
            checkpoints: (1..=MAX_ITERATIONS / CHECKPOINT_STRIDE)
                .map(|k| k * CHECKPOINT_STRIDE)
                .collect(),
        }
    }

    /// Depths 4 and 5, uniform widths 16/32/64, both skip settings, stopping points up to 800.
    pub fn reduced() -> Self {
        Self {
            depths: vec![4, 5],
            widths: vec![
                WidthMode::Uniform(16),
                WidthMode::Uniform(32),
                WidthMode::Uniform(64),
            ],
            skips: vec![true, false],
            checkpoints: (1..=8).map(|k| k * CHECKPOINT_STRIDE).collect(),
        }
    }

    /// Checks that every axis is a non-empty, strictly increasing subset of the full grid.
    pub fn validate(&self) -> Result<()> {
        let full = Self::full();
        fn check<T: PartialOrd + std::fmt::Debug>(
            name: &str,
            values: &[T],
            allowed: &[T],
        ) -> Result<()> {
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "search space has no {name}"
                )));
            }
            if let Some(v) = values.iter().find(|v| !allowed.contains(v)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} value {v:?} is outside the search grid"
                )));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be strictly increasing"
                )));
            }
            Ok(())
        }
        check("depths", &self.depths, &full.depths)?;
        check("widths", &self.widths, &full.widths)?;
        check("checkpoints", &self.checkpoints, &full.checkpoints)?;
        if self.skips.is_empty()
            || self.skips.len() > 2
            || (self.skips.len() == 2 && self.skips[0] == self.skips[1])
        {
            return Err(Error::InvalidArgument(
                "skips must list true and/or false once each".into(),
            ));
        }
        Ok(())
    }

    pub fn architectures(&self, seed: u64) -> Vec<NetworkSpec> {
        let mut out = Vec::with_capacity(self.architecture_count());
        for &depth in &self.depths {
            for &width in &self.widths {
                for &skip in &self.skips {
                    out.push(NetworkSpec::new(depth, width, skip).with_seed(seed));
                }
            }
        }
        out
    }

    pub fn architecture_count(&self) -> usize {
        self.depths.len() * self.widths.len() * self.skips.len()
    }

    pub fn config_count(&self) -> usize {
        self.architecture_count() * self.checkpoints.len()
    }

    pub fn configs(&self, seed: u64) -> Vec<DipConfig> {
        self.architectures(seed)
            .into_iter()
            .flat_map(|spec| {
                self.checkpoints
                    .iter()
                    .map(move |&i| DipConfig::new(spec, i))
            })
            .collect()
    }

    pub fn contains(&self, config: &DipConfig) -> bool {
        self.depths.contains(&config.spec.depth)
            && self.widths.contains(&config.spec.width)
            && self.skips.contains(&config.spec.skip)
            && self.checkpoints.contains(&config.iteration)
    }

    /// Fit settings that reach the last checkpoint; learning rate and input scale come from `base`.
    pub fn run_config(&self, base: &RunConfig) -> RunConfig {
        RunConfig {
            max_iterations: *self.checkpoints.last().expect("validated space"),
            checkpoint_stride: CHECKPOINT_STRIDE,
            ..*base
        }
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self::full()
    }
}

/// Every architecture of the full grid paired with its candidate stopping points.
pub fn enumerate_search_space() -> Vec<(NetworkSpec, Vec<usize>)> {
    let space = SearchSpace::full();
    space
        .architectures(0)
        .into_iter()
        .map(|spec| (spec, space.checkpoints.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_counts() {
        let all = enumerate_search_space();
        assert_eq!(all.len(), 70);
        assert_eq!(all.iter().map(|(_, c)| c.len()).sum::<usize>(), 2100);
        assert_eq!(SearchSpace::full().config_count(), 2100);
        let baseline = NetworkSpec::new(5, WidthMode::Uniform(128), true);
        assert!(all.iter().any(|(s, c)| *s == baseline && c.contains(&1800)));
        let corner = NetworkSpec::new(8, WidthMode::Progressive512, false);
        assert!(all.iter().any(|(s, _)| *s == corner));
    }

    #[test]
    fn reduced_grid() {
        let space = SearchSpace::reduced();
        space.validate().unwrap();
        assert_eq!(space.config_count(), 96);
        let cfg = space.run_config(&RunConfig::default());
        assert_eq!((cfg.max_iterations, cfg.checkpoint_stride), (800, 100));
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_rejects_off_grid_values() {
        let mut space = SearchSpace::reduced();
        space.checkpoints.push(850);
        assert!(space.validate().is_err());
        let mut space = SearchSpace::reduced();
        space.depths = vec![5, 4];
        assert!(space.validate().is_err());
        let mut space = SearchSpace::reduced();
        space.skips = vec![true, true];
        assert!(space.validate().is_err());
        let mut space = SearchSpace::reduced();
        space.widths.clear();
        assert!(space.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let space = SearchSpace::full();
        let json = serde_json::to_string(&space).unwrap();
        assert!(json.contains(r#""v512""#));
        assert_eq!(serde_json::from_str::<SearchSpace>(&json).unwrap(), space);
    }
}
