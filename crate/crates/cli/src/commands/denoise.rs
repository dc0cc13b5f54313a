use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use autodip::calibration::load_store;
use autodip::image::{load_image_any, save_image, ImageMeta, Microscope};
use autodip::transfer::{
    baseline_config, denoise_with_config, select_config, DecisionSource, TransferDecision,
    TransferStrategy,
};
use serde::{Deserialize, Serialize};

use super::{to_json_line, write_atomic};
use crate::config::CliConfig;

pub struct DenoiseRequest<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub microscope: Microscope,
    pub specimen: &'a str,
    pub noise_level: Option<u32>,
    pub store: Option<&'a Path>,
    /// `baseline` or a transfer strategy string; the configured default when absent.
    pub strategy: Option<&'a str>,
    /// Where to write the decision record; see [`decision_path`].
    pub decision: Option<&'a Path>,
}

/// Wall-clock figures, kept apart from the decision so records compare across runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub selection_secs: f64,
    pub denoise_secs: f64,
    pub runs: usize,
    pub retries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseRecord {
    pub input: PathBuf,
    pub output: PathBuf,
    pub meta: ImageMeta,
    pub decision: TransferDecision,
    pub timings: Timings,
}

/// Default decision record location: the output path with `.decision.json` appended.
pub fn decision_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".decision.json");
    PathBuf::from(name)
}

/// Denoises one image with the configuration chosen by the strategy.
///
/// The output keeps the input's bit depth, so integer inputs give integer outputs and
/// raw-float inputs give raw-float containers.
pub fn cmd_denoise(req: &DenoiseRequest<'_>, config: &CliConfig) -> Result<DenoiseRecord> {
    let strategy = req
        .strategy
        .map(str::to_string)
        .unwrap_or_else(|| config.strategy.to_string());
    let (input, depth) =
        load_image_any(req.input).with_context(|| format!("loading {}", req.input.display()))?;
    let id = req
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    let mut meta = ImageMeta::new(id, req.microscope, req.specimen);
    meta.noise_level = req.noise_level;
    meta.bit_depth = depth;
    meta.validate()?;

    let start = Instant::now();
    let decision = if strategy == "baseline" {
        TransferDecision {
            config: baseline_config(),
            source: DecisionSource::Baseline,
            similarity_value: None,
            strategy: strategy.clone(),
            scope: None,
        }
    } else {
        let parsed: TransferStrategy = strategy.parse()?;
        let Some(store_path) = req.store else {
            bail!("strategy `{strategy}` needs a calibration store");
        };
        let store = load_store(store_path)
            .with_context(|| format!("loading store {}", store_path.display()))?;
        let backend = config.backend()?;
        select_config(&input, &meta, &store, parsed, backend.as_ref())?
    };
    let selection_secs = start.elapsed().as_secs_f64();
    println!("{}: {} via {}", meta.source_id, decision.config, strategy);

    let (denoised, stats) =
        denoise_with_config(&input, &decision.config, &config.denoise_options())?;
    save_image(req.output, &denoised, depth)
        .with_context(|| format!("writing {}", req.output.display()))?;
    let record = DenoiseRecord {
        input: req.input.to_path_buf(),
        output: req.output.to_path_buf(),
        meta,
        decision,
        timings: Timings {
            selection_secs,
            denoise_secs: stats.wall_time_secs,
            runs: stats.runs,
            retries: stats.retries,
        },
    };
    let record_path = req
        .decision
        .map(Path::to_path_buf)
        .unwrap_or_else(|| decision_path(req.output));
    write_atomic(&record_path, &to_json_line(&record)?)?;
    println!(
        "wrote {} in {:.1}s",
        req.output.display(),
        stats.wall_time_secs
    );
    Ok(record)
}
