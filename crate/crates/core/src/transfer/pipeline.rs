use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::select::{select_config, TransferDecision};
use super::strategy::TransferStrategy;
use crate::calibration::CalibrationStore;
use crate::dip::{dip_denoise, DipConfig, NetworkSpec, RunConfig, WidthMode};
use crate::error::{Error, Result};
use crate::image::{
    denormalize, merge_channels, normalize, split_channels, stitch, tile, Image, ImageMeta, Patch,
    DEFAULT_OVERLAP, DEFAULT_PATCH_SIZE,
};
use crate::metrics::PerceptualBackend;

/// Stopping point of the fixed reference configuration.
pub const BASELINE_ITERATION: usize = 1800;

/// The untuned reference configuration: depth 5, 128 feature maps, skip links, 1800 iterations.
pub fn baseline_config() -> DipConfig {
    DipConfig::new(
        NetworkSpec::new(5, WidthMode::Uniform(128), true),
        BASELINE_ITERATION,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiseOptions {
    /// Learning rate and input scale of every fit.
    pub run: RunConfig,
    pub workers: usize,
    pub patch_size: usize,
    pub overlap: usize,
}

impl Default for DenoiseOptions {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            workers: 1,
            patch_size: DEFAULT_PATCH_SIZE,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

/// Bookkeeping of one denoising call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseStats {
    pub runs: usize,
    pub retries: usize,
    pub wall_time_secs: f64,
}

fn denoise_patch(patch: &Image, config: &DipConfig, run: &RunConfig) -> Result<(Image, bool)> {
    match dip_denoise(patch, &config.spec, config.iteration, run) {
        Ok(img) => Ok((img, false)),
        Err(Error::Diverged { .. }) => {
            let retry = config.spec.with_seed(config.spec.seed.wrapping_add(1));
            Ok((dip_denoise(patch, &retry, config.iteration, run)?, true))
        }
        Err(e) => Err(e),
    }
}

/// Denoises `input` with a fixed configuration.
///
/// Each channel is normalized, tiled when larger than the patch size, fitted patch by
/// patch, stitched and denormalized. A diverged patch is retried once with the next seed.
pub fn denoise_with_config(
    input: &Image,
    config: &DipConfig,
    options: &DenoiseOptions,
) -> Result<(Image, DenoiseStats)> {
    config.spec.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let mut channels = Vec::with_capacity(input.channels());
    let (mut runs, mut retries) = (0, 0);
    for channel in split_channels(input) {
        let (norm, params) = normalize(&channel);
        let patches = tile(&norm, options.patch_size, options.overlap)?;
        let fitted: Vec<Result<(Patch, bool)>> = pool.install(|| {
            patches
                .par_iter()
                .map(|p| {
                    let (data, retried) = denoise_patch(&p.data, config, &options.run)?;
                    Ok((
                        Patch {
                            offset_y: p.offset_y,
                            offset_x: p.offset_x,
                            data,
                        },
                        retried,
                    ))
                })
                .collect()
        });
        let mut out = Vec::with_capacity(fitted.len());
        for f in fitted {
            let (patch, retried) = f?;
            retries += retried as usize;
            out.push(patch);
        }
        runs += out.len() + retries;
        let stitched = stitch(&out, norm.height(), norm.width())?;
        channels.push(denormalize(&stitched, &params)?);
    }
    Ok((
        merge_channels(&channels)?,
        DenoiseStats {
            runs,
            retries,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Selects a configuration for `input` from the store, then denoises with it.
pub fn auto_denoise(
    input: &Image,
    meta: &ImageMeta,
    store: &CalibrationStore,
    strategy: TransferStrategy,
    backend: &dyn PerceptualBackend,
    options: &DenoiseOptions,
) -> Result<(Image, TransferDecision, DenoiseStats)> {
    let decision = select_config(input, meta, store, strategy, backend)?;
    let (image, stats) = denoise_with_config(input, &decision.config, options)?;
    Ok((image, decision, stats))
}
