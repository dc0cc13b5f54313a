mod calibrate;
mod denoise;
mod evaluate;
mod inspect;
mod synth;

pub use calibrate::{
    cmd_calibrate, default_grid_dir, load_cached_grid, CachedGrid, CalibrateSummary,
};
pub use denoise::{cmd_denoise, decision_path, DenoiseRecord, DenoiseRequest, Timings};
pub use evaluate::{cmd_evaluate, parse_column, Column, EvaluateRequest, ImageResult, Report};
pub use inspect::{cmd_inspect_store, render_store};
pub use synth::{cmd_synth, SynthSummary, CALIBRATION_MANIFEST, VALIDATION_MANIFEST};

use std::path::Path;

use anyhow::{Context, Result};

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", path.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn to_json_line<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}
