use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use autodip::calibration::{GroupObjective, SearchSpace};
use autodip::dip::RunConfig;
use autodip::image::{DEFAULT_OVERLAP, DEFAULT_PATCH_SIZE};
use autodip::metrics::{LearnedBackend, MultiScaleSsim, PerceptualBackend};
use autodip::transfer::{DenoiseOptions, TransferStrategy};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "AUTODIP_WORKERS";

/// Settings shared by all subcommands, read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub workers: usize,
    pub search_space: SearchSpace,
    pub seed: u64,
    pub learning_rate: f32,
    pub input_noise_scale: f32,
    pub strategy: TransferStrategy,
    pub group_objective: GroupObjective,
    /// Weights of the learned perceptual backend; the multi-scale SSIM backend is used when unset.
    pub perceptual_weights: Option<PathBuf>,
    pub patch_size: usize,
    pub overlap: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        let run = RunConfig::default();
        Self {
            workers: 1,
            search_space: SearchSpace::full(),
            seed: 0,
            learning_rate: run.learning_rate,
            input_noise_scale: run.input_noise_scale,
            strategy: TransferStrategy::default(),
            group_objective: GroupObjective::default(),
            perceptual_weights: None,
            patch_size: DEFAULT_PATCH_SIZE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

impl CliConfig {
    /// Reads `path` (defaults when `None`) and applies the worker-count environment override.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => CliConfig::default(),
        };
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            config.workers = v
                .trim()
                .parse()
                .with_context(|| format!("{WORKERS_ENV}=`{v}` is not a worker count"))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            bail!("worker count must be at least 1");
        }
        if self.patch_size <= self.overlap {
            bail!("patch_size must exceed overlap");
        }
        self.search_space.validate()?;
        self.run_config().with_iterations(100).validate()?;
        Ok(())
    }

    /// Learning rate and input scale; iteration settings are filled in per use.
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            learning_rate: self.learning_rate,
            input_noise_scale: self.input_noise_scale,
            ..RunConfig::default()
        }
    }

    pub fn denoise_options(&self) -> DenoiseOptions {
        DenoiseOptions {
            run: self.run_config(),
            workers: self.workers,
            patch_size: self.patch_size,
            overlap: self.overlap,
        }
    }

    pub fn backend(&self) -> Result<Box<dyn PerceptualBackend>> {
        Ok(match &self.perceptual_weights {
            Some(p) => Box::new(LearnedBackend::load(p)?),
            None => Box::new(MultiScaleSsim),
        })
    }
}
