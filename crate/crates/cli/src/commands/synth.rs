use std::path::{Path, PathBuf};

use anyhow::Result;
use autodip::image::{write_raw_float, BitDepth};
use autodip::synth::{build_synthetic_dataset, DatasetSpec, Split};

use super::write_atomic;
use crate::manifest::{write_manifest, ManifestEntry};

pub const CALIBRATION_MANIFEST: &str = "calibration.json";
pub const VALIDATION_MANIFEST: &str = "validation.json";

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSummary {
    pub calibration: usize,
    pub validation: usize,
    pub calibration_manifest: PathBuf,
    pub validation_manifest: PathBuf,
}

/// Writes a synthetic dataset as raw-float images plus one manifest per split.
pub fn cmd_synth(spec: &DatasetSpec, out_dir: &Path) -> Result<SynthSummary> {
    let items = build_synthetic_dataset(spec)?;
    let mut calibration = Vec::new();
    let mut validation = Vec::new();
    for item in &items {
        let id = &item.meta.source_id;
        let noisy = PathBuf::from("images").join(format!("{id}_noisy.raw"));
        let clean = PathBuf::from("images").join(format!("{id}_clean.raw"));
        write_atomic(&out_dir.join(&noisy), &write_raw_float(&item.noisy))?;
        write_atomic(&out_dir.join(&clean), &write_raw_float(&item.clean))?;
        let entry = ManifestEntry {
            id: Some(id.clone()),
            noisy_path: noisy,
            truth_path: Some(clean),
            microscope: item.meta.microscope,
            specimen: item.meta.specimen.clone(),
            noise_level: item.meta.noise_level,
            bit_depth: Some(BitDepth::RawFloat),
        };
        match item.split {
            Split::Calibration => calibration.push(entry),
            Split::Validation => validation.push(entry),
        }
    }
    let calibration_manifest = out_dir.join(CALIBRATION_MANIFEST);
    let validation_manifest = out_dir.join(VALIDATION_MANIFEST);
    write_manifest(&calibration_manifest, &calibration)?;
    write_manifest(&validation_manifest, &validation)?;
    println!(
        "wrote {} calibration and {} validation images to {}",
        calibration.len(),
        validation.len(),
        out_dir.display()
    );
    Ok(SynthSummary {
        calibration: calibration.len(),
        validation: validation.len(),
        calibration_manifest,
        validation_manifest,
    })
}
