use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::grid::ImageGrid;
use super::select::{best_combined, best_per_measure, group_best, GroupObjective};
use crate::dip::DipConfig;
use crate::error::{Error, Result};
use crate::image::{Image, ImageMeta, Microscope};
use crate::metrics::MetricKind;
use crate::transfer::{fingerprint, EmbeddingModel, FINGERPRINT_SIZE};

pub const STORE_FORMAT_VERSION: u32 = 1;

/// A metadata group: microscope, specimen, both, or neither (the global group).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub microscope: Option<Microscope>,
    pub specimen: Option<String>,
}

impl GroupKey {
    pub fn global() -> Self {
        Self::default()
    }

    pub fn microscope(m: Microscope) -> Self {
        Self {
            microscope: Some(m),
            specimen: None,
        }
    }

    pub fn specimen(s: impl Into<String>) -> Self {
        Self {
            microscope: None,
            specimen: Some(s.into()),
        }
    }

    pub fn both(m: Microscope, s: impl Into<String>) -> Self {
        Self {
            microscope: Some(m),
            specimen: Some(s.into()),
        }
    }

    pub fn is_global(&self) -> bool {
        self.microscope.is_none() && self.specimen.is_none()
    }

    /// Whether an image with `meta` belongs to this group.
    pub fn contains(&self, meta: &ImageMeta) -> bool {
        self.microscope.is_none_or(|m| meta.microscope == m)
            && self
                .specimen
                .as_ref()
                .is_none_or(|s| meta.specimen_known() && meta.specimen == *s)
    }

    /// Every group an image belongs to, given which of its metadata fields are known.
    pub fn memberships(meta: &ImageMeta) -> Vec<GroupKey> {
        let mut out = vec![GroupKey::global()];
        let microscope = meta.microscope.is_known().then_some(meta.microscope);
        let specimen = meta.specimen_known().then(|| meta.specimen.clone());
        if let Some(m) = microscope {
            out.push(GroupKey::microscope(m));
        }
        if let Some(s) = &specimen {
            out.push(GroupKey::specimen(s.clone()));
        }
        if let (Some(m), Some(s)) = (microscope, specimen) {
            out.push(GroupKey::both(m, s));
        }
        out
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.microscope, &self.specimen) {
            (None, None) => f.write_str("all"),
            (Some(m), None) => write!(f, "microscope={m}"),
            (None, Some(s)) => write!(f, "specimen={s}"),
            (Some(m), Some(s)) => write!(f, "microscope={m},specimen={s}"),
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(GroupKey::global());
        }
        let bad = || Error::InvalidArgument(format!("malformed group key `{s}`"));
        let (microscope, rest) = match s.strip_prefix("microscope=") {
            Some(tail) => match tail.split_once(',') {
                Some((m, rest)) => (Some(m.parse::<Microscope>()?), Some(rest)),
                None => (Some(tail.parse::<Microscope>()?), None),
            },
            None => (None, Some(s)),
        };
        let specimen = match rest {
            Some(r) => Some(r.strip_prefix("specimen=").ok_or_else(bad)?.to_string()),
            None => None,
        };
        if microscope == Some(Microscope::Unknown)
            || specimen
                .as_deref()
                .is_some_and(|s| s.is_empty() || s == "unknown")
        {
            return Err(bad());
        }
        Ok(GroupKey {
            microscope,
            specimen,
        })
    }
}

impl Serialize for GroupKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// What the store keeps about one calibration image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    pub image_id: String,
    pub meta: ImageMeta,
    pub best_by_measure: BTreeMap<MetricKind, DipConfig>,
    pub best_combined: DipConfig,
    /// Row-major 64×64 fingerprint of the noisy image.
    pub noisy_fingerprint: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl CalibrationEntry {
    pub fn fingerprint_image(&self) -> Image {
        Image::new(
            FINGERPRINT_SIZE,
            FINGERPRINT_SIZE,
            1,
            self.noisy_fingerprint.clone(),
        )
        .expect("validated fingerprint")
    }
}

/// A calibration image ready to be summarized into the store.
#[derive(Clone, Debug)]
pub struct CalibratedImage {
    pub meta: ImageMeta,
    pub noisy: Image,
    pub grid: ImageGrid,
}

/// The transfer dictionary: per-image and per-group optimal configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationStore {
    pub format_version: u32,
    pub entries: Vec<CalibrationEntry>,
    pub group_best: BTreeMap<GroupKey, DipConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_model: Option<EmbeddingModel>,
}

/// Summarizes calibrated images into a store: per-image optima, fingerprints, group
/// optima for every non-empty group, and the fingerprint embedding when there are at
/// least two entries.
pub fn build_store(
    images: &[CalibratedImage],
    objective: GroupObjective,
) -> Result<CalibrationStore> {
    if images.is_empty() {
        return Err(Error::Empty("no calibration images".into()));
    }
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(images.len());
    for img in images {
        img.meta.validate()?;
        let id = &img.grid.image_id;
        if !seen.insert(id.clone()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate calibration image id `{id}`"
            )));
        }
        entries.push(CalibrationEntry {
            image_id: id.clone(),
            meta: img.meta.clone(),
            best_by_measure: best_per_measure(&img.grid.results)?,
            best_combined: best_combined(&img.grid.results)?,
            noisy_fingerprint: fingerprint(&img.noisy)?.into_data(),
            embedding: None,
        });
    }
    let mut groups: BTreeMap<GroupKey, Vec<&ImageGrid>> = BTreeMap::new();
    for img in images {
        for key in GroupKey::memberships(&img.meta) {
            groups.entry(key).or_default().push(&img.grid);
        }
    }
    let group_best = groups
        .into_iter()
        .map(|(key, members)| Ok((key, group_best(&members, objective)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut store = CalibrationStore {
        format_version: STORE_FORMAT_VERSION,
        entries,
        group_best,
        embedding_model: None,
    };
    if store.entries.len() >= 2 {
        store.fit_embedding()?;
    }
    store.validate()?;
    Ok(store)
}

impl CalibrationStore {
    /// Fits the fingerprint embedding and records every entry's coordinates.
    pub fn fit_embedding(&mut self) -> Result<()> {
        let samples: Vec<&[f32]> = self
            .entries
            .iter()
            .map(|e| e.noisy_fingerprint.as_slice())
            .collect();
        let model = EmbeddingModel::fit(&samples)?;
        for e in &mut self.entries {
            e.embedding = Some(model.embed(&e.noisy_fingerprint)?);
        }
        self.embedding_model = Some(model);
        Ok(())
    }

    pub fn members(&self, key: &GroupKey) -> Vec<&CalibrationEntry> {
        self.entries
            .iter()
            .filter(|e| key.contains(&e.meta))
            .collect()
    }

    pub fn entry(&self, image_id: &str) -> Option<&CalibrationEntry> {
        self.entries.iter().find(|e| e.image_id == image_id)
    }

    /// Comma-separated list of groups with a stored optimum, for diagnostics.
    pub fn available_groups(&self) -> String {
        self.group_best
            .keys()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Checks internal consistency: fingerprint sizes, unique ids, a group optimum for
    /// every non-empty group, and embedding dimensions.
    pub fn validate(&self) -> Result<()> {
        let schema = |field: String, message: String| Error::Schema { field, message };
        let mut ids = BTreeSet::new();
        let expected_fp = FINGERPRINT_SIZE * FINGERPRINT_SIZE;
        for (i, e) in self.entries.iter().enumerate() {
            if !ids.insert(&e.image_id) {
                return Err(schema(
                    format!("entries[{i}].image_id"),
                    format!("duplicate id `{}`", e.image_id),
                ));
            }
            if e.noisy_fingerprint.len() != expected_fp {
                return Err(schema(
                    format!("entries[{i}].noisy_fingerprint"),
                    format!(
                        "expected {expected_fp} values, found {}",
                        e.noisy_fingerprint.len()
                    ),
                ));
            }
            if e.noisy_fingerprint.iter().any(|v| !v.is_finite()) {
                return Err(schema(
                    format!("entries[{i}].noisy_fingerprint"),
                    "non-finite value".into(),
                ));
            }
            for key in GroupKey::memberships(&e.meta) {
                if !self.group_best.contains_key(&key) {
                    return Err(schema(
                        format!("group_best.{key}"),
                        format!("missing although entry `{}` belongs to it", e.image_id),
                    ));
                }
            }
            match (&self.embedding_model, &e.embedding) {
                (Some(m), Some(v)) if v.len() != m.dims() => {
                    return Err(schema(
                        format!("entries[{i}].embedding"),
                        format!("expected {} dimensions, found {}", m.dims(), v.len()),
                    ))
                }
                (Some(_), None) => {
                    return Err(schema(format!("entries[{i}].embedding"), "missing".into()));
                }
                _ => {}
            }
        }
        for key in self.group_best.keys() {
            if self.members(key).is_empty() {
                return Err(schema(
                    format!("group_best.{key}"),
                    "group has no member entries".into(),
                ));
            }
        }
        if let Some(m) = &self.embedding_model {
            if m.input_len() != expected_fp || m.components.iter().any(|c| c.len() != expected_fp) {
                return Err(schema(
                    "embedding_model".into(),
                    "dimension does not match fingerprints".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("format_version").ok_or_else(|| Error::Schema {
            field: "format_version".into(),
            message: "missing".into(),
        })?;
        let found = version.as_u64().ok_or_else(|| Error::Schema {
            field: "format_version".into(),
            message: format!("expected an unsigned integer, found {version}"),
        })?;
        if found != STORE_FORMAT_VERSION as u64 {
            return Err(Error::StoreVersion {
                found,
                expected: STORE_FORMAT_VERSION,
            });
        }
        let store: CalibrationStore =
            serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
                field: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        store.validate()?;
        Ok(store)
    }
}

pub fn save_store(store: &CalibrationStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, store.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_store(path: impl AsRef<Path>) -> Result<CalibrationStore> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CalibrationStore::from_json(&text)
}
