use serde::{Deserialize, Serialize};

use super::noise::{apply_noise, NoiseModel};
use super::phantom::{generate_phantom, PhantomKind};
use crate::error::{Error, Result};
use crate::image::{Image, ImageMeta, Microscope};

/// Which half of a synthetic dataset an image belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Calibration,
    Validation,
}

/// Layout of a synthetic dataset: every kind is combined with every frame count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kinds: Vec<PhantomKind>,
    /// Frames averaged per noise regime; each regime stands in for one microscope type.
    pub noise_levels: Vec<u32>,
    pub calibration_per_cell: usize,
    pub validation_per_cell: usize,
    pub height: usize,
    pub width: usize,
    pub gaussian_sigma: f64,
    pub poisson_gain: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    /// Two kinds by three noise regimes, two calibration and one validation image each.
    fn default() -> Self {
        Self {
            kinds: vec![PhantomKind::Dots, PhantomKind::Filaments],
            noise_levels: vec![1, 4, 16],
            calibration_per_cell: 2,
            validation_per_cell: 1,
            height: 64,
            width: 64,
            gaussian_sigma: 0.2,
            poisson_gain: 100.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticItem {
    pub noisy: Image,
    pub clean: Image,
    pub meta: ImageMeta,
    pub split: Split,
    pub seed: u64,
}

const NOISE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

const MICROSCOPES: [Microscope; 3] = [
    Microscope::Confocal,
    Microscope::Widefield,
    Microscope::TwoPhoton,
];

/// Microscope analog of the `index`-th noise regime.
pub fn regime_microscope(index: usize) -> Result<Microscope> {
    MICROSCOPES.get(index).copied().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "at most {} noise regimes are supported",
            MICROSCOPES.len()
        ))
    })
}

/// Builds every (kind, noise regime) cell.
///
/// Kinds map to specimens and noise regimes to microscope types. Calibration images get
/// even seeds and validation images odd seeds, so the two splits never share a scene.
pub fn build_synthetic_dataset(spec: &DatasetSpec) -> Result<Vec<SyntheticItem>> {
    if spec.kinds.is_empty() || spec.noise_levels.is_empty() {
        return Err(Error::InvalidArgument(
            "dataset needs at least one kind and one noise level".into(),
        ));
    }
    let per_cell = spec.calibration_per_cell + spec.validation_per_cell;
    if per_cell == 0 {
        return Err(Error::InvalidArgument(
            "dataset needs at least one image per cell".into(),
        ));
    }
    let mut items = Vec::new();
    let mut cell = 0u64;
    for (regime, &frames) in spec.noise_levels.iter().enumerate() {
        let microscope = regime_microscope(regime)?;
        let model = NoiseModel {
            gaussian_sigma: spec.gaussian_sigma,
            poisson_gain: spec.poisson_gain,
            frames,
        };
        model.validate()?;
        for &kind in &spec.kinds {
            for k in 0..per_cell {
                let split = if k < spec.calibration_per_cell {
                    Split::Calibration
                } else {
                    Split::Validation
                };
                let base = spec
                    .seed
                    .wrapping_mul(1 << 20)
                    .wrapping_add(cell * per_cell as u64 + k as u64);
                let seed = 2 * base + (split == Split::Validation) as u64;
                let clean = generate_phantom(kind, seed, spec.height, spec.width)?;
                let noisy = apply_noise(&clean, &model, seed ^ NOISE_SEED_SALT)?;
                let role = match split {
                    Split::Calibration => "cal",
                    Split::Validation => "val",
                };
                let mut meta = ImageMeta::new(
                    format!("{role}-{kind}-s{frames}-{k}"),
                    microscope,
                    kind.as_str(),
                );
                meta.noise_level = Some(frames);
                items.push(SyntheticItem {
                    noisy,
                    clean,
                    meta,
                    split,
                    seed,
                });
            }
            cell += 1;
        }
    }
    Ok(items)
}
