use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use autodip::image::{load_image, load_image_any, BitDepth, Image, ImageMeta, Microscope};
use serde::{Deserialize, Serialize};

/// One image of a manifest. Relative paths are resolved against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Identifier used in stores and reports; the noisy file stem when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub noisy_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_path: Option<PathBuf>,
    pub microscope: Microscope,
    pub specimen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_level: Option<u32>,
    /// Declared file depth; taken from the file header when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_depth: Option<BitDepth>,
}

#[derive(Clone, Debug)]
pub struct Manifest {
    pub base: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn load_declared(path: &Path, depth: Option<BitDepth>) -> Result<(Image, BitDepth)> {
    let loaded = match depth {
        Some(d) => load_image(path, d).map(|img| (img, d)),
        None => load_image_any(path),
    };
    loaded.with_context(|| format!("loading {}", path.display()))
}

impl ManifestEntry {
    pub fn image_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.noisy_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        if entries.is_empty() {
            bail!("manifest {} lists no images", path.display());
        }
        let mut ids = std::collections::BTreeSet::new();
        for e in &entries {
            let id = e.image_id();
            if id.is_empty() || !ids.insert(id.clone()) {
                bail!(
                    "manifest {} has a missing or duplicate image id `{id}`",
                    path.display()
                );
            }
        }
        Ok(Self {
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            entries,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Noisy image and its metadata.
    pub fn load_noisy(&self, entry: &ManifestEntry) -> Result<(Image, ImageMeta)> {
        let (img, depth) = load_declared(&self.resolve(&entry.noisy_path), entry.bit_depth)?;
        let mut meta = ImageMeta::new(entry.image_id(), entry.microscope, entry.specimen.clone());
        meta.noise_level = entry.noise_level;
        meta.bit_depth = depth;
        meta.validate()?;
        Ok((img, meta))
    }

    pub fn load_truth(&self, entry: &ManifestEntry) -> Result<Image> {
        let Some(p) = &entry.truth_path else {
            bail!("manifest entry `{}` has no truth_path", entry.image_id());
        };
        Ok(load_declared(&self.resolve(p), entry.bit_depth)?.0)
    }
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(entries)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
