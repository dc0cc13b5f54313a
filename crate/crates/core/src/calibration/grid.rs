use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::SearchSpace;
use crate::dip::{dip_run, DipConfig, NetworkSpec, RunConfig, RunTrace};
use crate::error::{Error, Result};
use crate::image::{denormalize, merge_channels, normalize, split_channels, Image, NormParams};
use crate::metrics::{evaluate, MetricReport, PerceptualBackend};

/// Quality of one (architecture, stopping point) configuration on one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridResult {
    pub image_id: String,
    pub spec: NetworkSpec,
    pub iteration: usize,
    pub metrics: MetricReport,
}

impl GridResult {
    pub fn config(&self) -> DipConfig {
        DipConfig::new(self.spec, self.iteration)
    }
}

/// An architecture whose fit diverged; all its stopping points are missing from the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailedRun {
    pub spec: NetworkSpec,
    pub message: String,
}

/// The complete search result for one calibration image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageGrid {
    pub image_id: String,
    pub space: SearchSpace,
    pub seed: u64,
    pub results: Vec<GridResult>,
    #[serde(default)]
    pub failures: Vec<FailedRun>,
}

impl ImageGrid {
    pub fn get(&self, config: &DipConfig) -> Option<&GridResult> {
        self.results
            .iter()
            .find(|r| r.spec == config.spec && r.iteration == config.iteration)
    }

    /// True when both grids were searched over the same configurations.
    pub fn same_grid(&self, other: &ImageGrid) -> bool {
        self.space == other.space && self.seed == other.seed
    }
}

/// Settings shared by every calibration run.
#[derive(Clone, Copy)]
pub struct CalibrationOptions<'a> {
    /// Learning rate and input scale; iteration settings come from the search space.
    pub run: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub backend: &'a dyn PerceptualBackend,
}

fn fit_channels(channels: &[Image], spec: &NetworkSpec, cfg: &RunConfig) -> Result<Vec<RunTrace>> {
    channels.iter().map(|c| dip_run(c, spec, cfg)).collect()
}

fn score_architecture(
    image_id: &str,
    traces: &[RunTrace],
    params: &[NormParams],
    truth: &Image,
    checkpoints: &[usize],
    backend: &dyn PerceptualBackend,
) -> Result<Vec<GridResult>> {
    let spec = traces[0].spec;
    checkpoints
        .iter()
        .map(|&iteration| {
            let parts = traces
                .iter()
                .zip(params)
                .map(|(trace, p)| {
                    let snap = trace.snapshot_at(iteration).expect("checkpoint recorded");
                    denormalize(&snap.output.clamped(0.0, 1.0), p)
                })
                .collect::<Result<Vec<_>>>()?;
            let candidate = merge_channels(&parts)?;
            Ok(GridResult {
                image_id: image_id.to_string(),
                spec,
                iteration,
                metrics: evaluate(&candidate, truth, backend)?,
            })
        })
        .collect()
}

/// Fits every architecture of `space` once and scores each stopping point against `truth`.
///
/// Channels are normalized and fitted independently, then denormalized and merged
/// before scoring. Diverged architectures are recorded in `failures`.
pub fn calibrate_image(
    image_id: &str,
    noisy: &Image,
    truth: &Image,
    space: &SearchSpace,
    options: &CalibrationOptions<'_>,
) -> Result<ImageGrid> {
    space.validate()?;
    if !noisy.same_shape(truth) {
        return Err(Error::DimensionMismatch(format!(
            "noisy {:?} vs truth {:?}",
            noisy.dims(),
            truth.dims()
        )));
    }
    let cfg = space.run_config(&options.run);
    cfg.validate()?;
    let (channels, params): (Vec<Image>, Vec<NormParams>) =
        split_channels(noisy).iter().map(normalize).unzip();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let archs = space.architectures(options.seed);
    let outcomes: Vec<Result<std::result::Result<Vec<GridResult>, FailedRun>>> =
        pool.install(|| {
            archs
                .par_iter()
                .map(|spec| match fit_channels(&channels, spec, &cfg) {
                    Ok(traces) => score_architecture(
                        image_id,
                        &traces,
                        &params,
                        truth,
                        &space.checkpoints,
                        options.backend,
                    )
                    .map(Ok),
                    Err(e @ Error::Diverged { .. }) => Ok(Err(FailedRun {
                        spec: *spec,
                        message: e.to_string(),
                    })),
                    Err(e) => Err(e),
                })
                .collect()
        });
    let mut results = Vec::with_capacity(space.config_count());
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(r) => results.extend(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(ImageGrid {
        image_id: image_id.to_string(),
        space: space.clone(),
        seed: options.seed,
        results,
        failures,
    })
}
