use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use autodip::calibration::{best_per_measure, load_store, CalibrationStore};
use autodip::dip::DipConfig;
use autodip::image::{Image, ImageMeta};
use autodip::metrics::{evaluate, MetricKind, MetricReport, PerceptualBackend};
use autodip::transfer::{
    baseline_config, denoise_with_config, select_config, Scope, TransferStrategy,
};
use serde::{Deserialize, Serialize};

use super::calibrate::load_cached_grid;
use super::{to_json_line, write_atomic};
use crate::config::CliConfig;
use crate::manifest::Manifest;

/// One column of the evaluation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Baseline,
    /// Per-image PSNR optimum of a cached grid search.
    Oracle,
    Transfer(TransferStrategy),
}

impl Column {
    pub fn name(&self) -> String {
        match self {
            Column::Baseline => "baseline".into(),
            Column::Oracle => "oracle".into(),
            Column::Transfer(s) => s.to_string(),
        }
    }
}

pub fn parse_column(s: &str) -> Result<Column> {
    Ok(match s.trim() {
        "baseline" => Column::Baseline,
        "oracle" => Column::Oracle,
        other => Column::Transfer(other.parse()?),
    })
}

pub struct EvaluateRequest<'a> {
    pub manifest: &'a Path,
    pub store: Option<&'a Path>,
    pub strategies: &'a [String],
    pub report: &'a Path,
    /// Cached calibration grids of the manifest images, for the oracle column.
    pub grid_dir: Option<&'a Path>,
    /// Per-image results; defaults to `<report>.cache/`.
    pub cache_dir: Option<&'a Path>,
}

/// Score of one column on one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageResult {
    pub image_id: String,
    pub group: String,
    pub column: String,
    pub config: DipConfig,
    pub metrics: MetricReport,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub group: String,
    /// Per column mean, `None` where the column is unavailable.
    pub psnr: Vec<Option<f64>>,
    pub perceptual: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub columns: Vec<String>,
    /// One row per group, then the overall row.
    pub rows: Vec<ReportRow>,
    pub results: Vec<ImageResult>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

impl Report {
    /// Tab-separated table: a PSNR line above a perceptual line for each group.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("group\tmeasure\t{}\n", self.columns.join("\t"));
        for row in &self.rows {
            for (measure, values) in [("psnr", &row.psnr), ("perceptual", &row.perceptual)] {
                let cells: Vec<String> = values.iter().map(|&v| cell(v)).collect();
                let _ = writeln!(out, "{}\t{measure}\t{}", row.group, cells.join("\t"));
            }
        }
        out
    }

    pub fn row(&self, group: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.group == group)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Label of the most specific group the image's metadata allows.
fn group_label(meta: &ImageMeta) -> String {
    Scope::MicroscopeSpecimen
        .fallback_chain()
        .iter()
        .find_map(|s| s.group_key(meta))
        .map(|k| k.to_string())
        .unwrap_or_else(|| "all".into())
}

fn cache_file(dir: &Path, image_id: &str) -> PathBuf {
    dir.join(format!("{image_id}.json"))
}

fn load_image_cache(dir: &Path, image_id: &str) -> Result<BTreeMap<String, ImageResult>> {
    let path = cache_file(dir, image_id);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

struct Scorer<'a> {
    config: &'a CliConfig,
    backend: &'a dyn PerceptualBackend,
    store: Option<&'a CalibrationStore>,
}

impl Scorer<'_> {
    fn choose(&self, column: Column, noisy: &Image, meta: &ImageMeta) -> Result<DipConfig> {
        match column {
            Column::Baseline => Ok(baseline_config()),
            Column::Transfer(strategy) => {
                let store = self
                    .store
                    .context("transfer strategies need a calibration store")?;
                Ok(select_config(noisy, meta, store, strategy, self.backend)?.config)
            }
            Column::Oracle => unreachable!("oracle values come from cached grids"),
        }
    }

    fn run(&self, config: &DipConfig, noisy: &Image, truth: &Image) -> Result<(MetricReport, f64)> {
        let (denoised, stats) = denoise_with_config(noisy, config, &self.config.denoise_options())?;
        Ok((
            evaluate(&denoised, truth, self.backend)?,
            stats.wall_time_secs,
        ))
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Scores every manifest image under each requested column plus baseline and oracle.
///
/// Per-image results are cached, so rerunning rebuilds the same table without denoising
/// again. The oracle column is unavailable unless every image of a row has a cached grid.
pub fn cmd_evaluate(req: &EvaluateRequest<'_>, config: &CliConfig) -> Result<Report> {
    let mut columns: Vec<Column> = Vec::new();
    for s in req.strategies {
        let c = parse_column(s)?;
        if !columns.contains(&c) {
            columns.push(c);
        }
    }
    for c in [Column::Baseline, Column::Oracle] {
        if !columns.contains(&c) {
            columns.push(c);
        }
    }
    let manifest = Manifest::load(req.manifest)?;
    let store = match req.store {
        Some(p) => Some(load_store(p).with_context(|| format!("loading store {}", p.display()))?),
        None if columns.iter().any(|c| matches!(c, Column::Transfer(_))) => {
            bail!("transfer strategies need a calibration store")
        }
        None => None,
    };
    let backend = config.backend()?;
    let scorer = Scorer {
        config,
        backend: backend.as_ref(),
        store: store.as_ref(),
    };
    let cache_dir = req.cache_dir.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut name = req.report.as_os_str().to_owned();
        name.push(".cache");
        PathBuf::from(name)
    });

    let mut results = Vec::new();
    // (group, column) -> per-image results; missing images make the cell unavailable
    let mut groups: BTreeMap<String, usize> = BTreeMap::new();
    for entry in &manifest.entries {
        let id = entry.image_id();
        let (noisy, meta) = manifest.load_noisy(entry)?;
        let truth = manifest.load_truth(entry)?;
        let group = group_label(&meta);
        *groups.entry(group.clone()).or_default() += 1;
        let mut cached = load_image_cache(&cache_dir, &id)?;
        let mut computed: BTreeMap<DipConfig, (MetricReport, f64)> = cached
            .values()
            .map(|r| (r.config, (r.metrics, r.wall_time_secs)))
            .collect();
        let mut dirty = false;
        for &column in &columns {
            let name = column.name();
            if column == Column::Oracle {
                let Some(dir) = req.grid_dir else { continue };
                let Some(grid) = load_cached_grid(dir, &id)? else {
                    continue;
                };
                let best = best_per_measure(&grid.grid.results)?[&MetricKind::Psnr];
                let metrics = grid
                    .grid
                    .get(&best)
                    .expect("optimum is in the grid")
                    .metrics;
                results.push(ImageResult {
                    image_id: id.clone(),
                    group: group.clone(),
                    column: name,
                    config: best,
                    metrics,
                    wall_time_secs: 0.0,
                });
                continue;
            }
            let chosen = scorer
                .choose(column, &noisy, &meta)
                .with_context(|| format!("`{name}` on `{id}`"))?;
            let result = match cached.get(&name).filter(|r| r.config == chosen) {
                Some(r) => r.clone(),
                None => {
                    let (metrics, secs) = match computed.get(&chosen) {
                        Some(m) => *m,
                        None => scorer
                            .run(&chosen, &noisy, &truth)
                            .with_context(|| format!("`{name}` on `{id}`"))?,
                    };
                    computed.insert(chosen, (metrics, secs));
                    dirty = true;
                    let r = ImageResult {
                        image_id: id.clone(),
                        group: group.clone(),
                        column: name.clone(),
                        config: chosen,
                        metrics,
                        wall_time_secs: secs,
                    };
                    cached.insert(name, r.clone());
                    r
                }
            };
            println!(
                "{id}\t{}\t{}\tpsnr {:.2}",
                result.column, result.config, result.metrics.psnr
            );
            results.push(result);
        }
        if dirty {
            write_atomic(&cache_file(&cache_dir, &id), &to_json_line(&cached)?)?;
        }
    }

    let names: Vec<String> = columns.iter().map(Column::name).collect();
    let summarize =
        |label: &str, count: usize, filter: &dyn Fn(&ImageResult) -> bool| -> ReportRow {
            let mut row = ReportRow {
                group: label.to_string(),
                psnr: Vec::new(),
                perceptual: Vec::new(),
            };
            for name in &names {
                let hits: Vec<&ImageResult> = results
                    .iter()
                    .filter(|r| &r.column == name && filter(r))
                    .collect();
                if hits.len() == count {
                    row.psnr.push(Some(mean(
                        &hits.iter().map(|r| r.metrics.psnr).collect::<Vec<_>>(),
                    )));
                    row.perceptual.push(Some(mean(
                        &hits
                            .iter()
                            .map(|r| r.metrics.perceptual)
                            .collect::<Vec<_>>(),
                    )));
                } else {
                    row.psnr.push(None);
                    row.perceptual.push(None);
                }
            }
            row
        };
    let mut rows: Vec<ReportRow> = groups
        .iter()
        .map(|(g, &n)| summarize(g, n, &|r: &ImageResult| &r.group == g))
        .collect();
    rows.push(summarize("overall", manifest.entries.len(), &|_| true));
    let report = Report {
        columns: names,
        rows,
        results,
    };
    write_atomic(req.report, report.to_tsv().as_bytes())?;
    print!("{}", report.to_tsv());
    Ok(report)
}
