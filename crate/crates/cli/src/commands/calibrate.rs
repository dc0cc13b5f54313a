use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use autodip::calibration::{
    best_combined, build_store, calibrate_image, save_store, CalibratedImage, CalibrationOptions,
    ImageGrid,
};
use autodip::metrics::MetricKind;
use serde::{Deserialize, Serialize};

use super::{to_json_line, write_atomic};
use crate::config::CliConfig;
use crate::manifest::Manifest;

/// Per-image partial result of a calibration run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CachedGrid {
    pub wall_time_secs: f64,
    pub grid: ImageGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrateSummary {
    pub images: usize,
    pub resumed: usize,
    pub groups: usize,
}

/// Where grids are cached when no directory is given: `<store>.grids/`.
pub fn default_grid_dir(store_path: &Path) -> PathBuf {
    let mut name = store_path.as_os_str().to_owned();
    name.push(".grids");
    PathBuf::from(name)
}

fn grid_file(dir: &Path, image_id: &str) -> PathBuf {
    dir.join(format!("{image_id}.json"))
}

/// The cached grid of `image_id`, if present and readable.
pub fn load_cached_grid(dir: &Path, image_id: &str) -> Result<Option<CachedGrid>> {
    let path = grid_file(dir, image_id);
    if !path.exists() {
        return Ok(None);
    }
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let cached =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(cached))
}

/// Calibrates every manifest image and writes the store.
///
/// Each finished image grid is written to the cache directory right away; a rerun reuses
/// cached grids searched over the same space and seed.
pub fn cmd_calibrate(
    manifest_path: &Path,
    store_path: &Path,
    config: &CliConfig,
    grid_dir: Option<&Path>,
) -> Result<CalibrateSummary> {
    let manifest = Manifest::load(manifest_path)?;
    let grid_dir = grid_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_grid_dir(store_path));
    let backend = config.backend()?;
    let options = CalibrationOptions {
        run: config.run_config(),
        seed: config.seed,
        workers: config.workers,
        backend: backend.as_ref(),
    };
    let total = manifest.entries.len();
    let mut images = Vec::with_capacity(total);
    let mut resumed = 0;
    for (n, entry) in manifest.entries.iter().enumerate() {
        let id = entry.image_id();
        let (noisy, meta) = manifest.load_noisy(entry)?;
        let cached = load_cached_grid(&grid_dir, &id)?.filter(|c| {
            c.grid.image_id == id
                && c.grid.space == config.search_space
                && c.grid.seed == config.seed
        });
        let (grid, secs, reused) = match cached {
            Some(c) => (c.grid, c.wall_time_secs, true),
            None => {
                let truth = manifest.load_truth(entry)?;
                let start = Instant::now();
                let grid = calibrate_image(&id, &noisy, &truth, &config.search_space, &options)
                    .with_context(|| format!("calibrating `{id}`"))?;
                let cached = CachedGrid {
                    wall_time_secs: start.elapsed().as_secs_f64(),
                    grid,
                };
                write_atomic(&grid_file(&grid_dir, &id), &to_json_line(&cached)?)?;
                (cached.grid, cached.wall_time_secs, false)
            }
        };
        resumed += reused as usize;
        let best = best_combined(&grid.results)
            .with_context(|| format!("no usable configuration for `{id}`"))?;
        let psnr = grid
            .get(&best)
            .map(|r| r.metrics.get(MetricKind::Psnr))
            .unwrap_or(f64::NAN);
        println!(
            "[{}/{total}] {id}: best {best} psnr {psnr:.2} dB, {} failed, {secs:.1}s{}",
            n + 1,
            grid.failures.len(),
            if reused { " (cached)" } else { "" }
        );
        images.push(CalibratedImage { meta, noisy, grid });
    }
    let store = build_store(&images, config.group_objective)?;
    save_store(&store, store_path)
        .with_context(|| format!("writing store {}", store_path.display()))?;
    println!(
        "wrote {} entries and {} group optima to {}",
        store.entries.len(),
        store.group_best.len(),
        store_path.display()
    );
    Ok(CalibrateSummary {
        images: total,
        resumed,
        groups: store.group_best.len(),
    })
}
