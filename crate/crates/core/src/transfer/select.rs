use serde::{Deserialize, Serialize};

use super::embedding::{euclidean, EmbeddingModel};
use super::fingerprint::fingerprint;
use super::strategy::{Scope, SimilarityKind, TransferStrategy};
use crate::calibration::{CalibrationEntry, CalibrationStore, GroupKey};
use crate::dip::DipConfig;
use crate::error::{Error, Result};
use crate::image::{mean_gradient, Image, ImageMeta};
use crate::metrics::{mae, mse, psnr, ssim, PerceptualBackend};

/// Where a transferred configuration came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecisionSource {
    Group { group: GroupKey },
    Image { image_id: String },
    Baseline,
    Oracle { image_id: String },
}

/// The outcome of configuration selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferDecision {
    pub config: DipConfig,
    pub source: DecisionSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_value: Option<f64>,
    pub strategy: String,
    /// Scope actually used after falling back over unknown metadata.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<Scope>,
}

/// Walks the fallback chain of `scope`.
///
/// The requested scope is used when the metadata it needs is known; if its group is then
/// empty that is an error. Scopes with unknown metadata are skipped, as are empty groups
/// reached by falling back.
pub fn resolve_scope(
    meta: &ImageMeta,
    store: &CalibrationStore,
    scope: Scope,
) -> Result<(Scope, GroupKey)> {
    for (i, &s) in scope.fallback_chain().iter().enumerate() {
        let Some(key) = s.group_key(meta) else {
            continue;
        };
        if store.group_best.contains_key(&key) {
            return Ok((s, key));
        }
        if i == 0 {
            return Err(Error::EmptyPool {
                scope: key.to_string(),
                available: store.available_groups(),
            });
        }
    }
    Err(Error::EmptyPool {
        scope: scope.as_str().into(),
        available: store.available_groups(),
    })
}

/// Candidate pool of `scope` for an image with `meta`, after fallback.
pub fn candidate_pool<'a>(
    meta: &ImageMeta,
    store: &'a CalibrationStore,
    scope: Scope,
) -> Result<Vec<&'a CalibrationEntry>> {
    let (_, key) = resolve_scope(meta, store, scope)?;
    Ok(store.members(&key))
}

/// Index into `pool` of the entry whose fingerprint is closest to `input_fingerprint`,
/// with the raw measure value. Ties go to the lower index.
pub fn nearest_calibration_image(
    input_fingerprint: &Image,
    pool: &[&CalibrationEntry],
    kind: SimilarityKind,
    backend: &dyn PerceptualBackend,
    model: Option<&EmbeddingModel>,
) -> Result<(usize, f64)> {
    if pool.is_empty() {
        return Err(Error::Empty("empty calibration pool".into()));
    }
    let input_gradient = match kind {
        SimilarityKind::MeanGradient => mean_gradient(input_fingerprint)?,
        _ => 0.0,
    };
    let input_embedding = match kind {
        SimilarityKind::Embedding => Some(
            model
                .ok_or(Error::NoEmbedding)?
                .embed(input_fingerprint.data())?,
        ),
        _ => None,
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, entry) in pool.iter().enumerate() {
        let fp = entry.fingerprint_image();
        let value = match kind {
            SimilarityKind::Mae => mae(input_fingerprint, &fp)?,
            SimilarityKind::Mse => mse(input_fingerprint, &fp)?,
            SimilarityKind::Psnr => psnr(input_fingerprint, &fp)?,
            SimilarityKind::Ssim => ssim(input_fingerprint, &fp)?,
            SimilarityKind::Perceptual => backend.distance(input_fingerprint, &fp)?,
            SimilarityKind::MeanGradient => (input_gradient - mean_gradient(&fp)?).abs(),
            SimilarityKind::Embedding => {
                let coords = entry.embedding.as_ref().ok_or(Error::NoEmbedding)?;
                euclidean(input_embedding.as_ref().expect("computed above"), coords)
            }
        };
        let better = match best {
            None => true,
            Some((_, b)) if kind.higher_is_closer() => value > b,
            Some((_, b)) => value < b,
        };
        if better {
            best = Some((i, value));
        }
    }
    Ok(best.expect("non-empty pool"))
}

/// Chooses a configuration for `input` under `strategy`.
pub fn select_config(
    input: &Image,
    meta: &ImageMeta,
    store: &CalibrationStore,
    strategy: TransferStrategy,
    backend: &dyn PerceptualBackend,
) -> Result<TransferDecision> {
    let fp = match strategy {
        TransferStrategy::GroupOnly(_) => None,
        TransferStrategy::MetricBased { .. } => Some(fingerprint(input)?),
    };
    select_config_for_fingerprint(fp.as_ref(), meta, store, strategy, backend)
}

/// As [`select_config`] with a precomputed fingerprint (only needed by metric-based strategies).
pub fn select_config_for_fingerprint(
    input_fingerprint: Option<&Image>,
    meta: &ImageMeta,
    store: &CalibrationStore,
    strategy: TransferStrategy,
    backend: &dyn PerceptualBackend,
) -> Result<TransferDecision> {
    let (scope, key) = resolve_scope(meta, store, strategy.scope())?;
    match strategy {
        TransferStrategy::GroupOnly(_) => Ok(TransferDecision {
            config: store.group_best[&key],
            source: DecisionSource::Group { group: key },
            similarity_value: None,
            strategy: strategy.to_string(),
            scope: Some(scope),
        }),
        TransferStrategy::MetricBased { similarity, .. } => {
            let fp = input_fingerprint.ok_or_else(|| {
                Error::InvalidArgument("metric-based transfer needs a fingerprint".into())
            })?;
            let pool = store.members(&key);
            let (index, value) = nearest_calibration_image(
                fp,
                &pool,
                similarity,
                backend,
                store.embedding_model.as_ref(),
            )?;
            let entry = pool[index];
            Ok(TransferDecision {
                config: entry.best_combined,
                source: DecisionSource::Image {
                    image_id: entry.image_id.clone(),
                },
                similarity_value: Some(value),
                strategy: strategy.to_string(),
                scope: Some(scope),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::fixtures::{fake_image, meta, sample_store};
    use crate::image::Microscope;
    use crate::metrics::MultiScaleSsim;

    fn metric(similarity: SimilarityKind, scope: Scope) -> TransferStrategy {
        TransferStrategy::MetricBased { similarity, scope }
    }

    #[test]
    fn group_lookup_names_the_group() {
        let store = sample_store();
        let img = fake_image("q", Microscope::Confocal, "dots", 9.0);
        let strategy = TransferStrategy::GroupOnly(Scope::MicroscopeSpecimen);
        let d = select_config(&img.noisy, &img.meta, &store, strategy, &MultiScaleSsim).unwrap();
        let key = GroupKey::both(Microscope::Confocal, "dots");
        assert_eq!(d.config, store.group_best[&key]);
        assert_eq!(d.source, DecisionSource::Group { group: key });
        assert_eq!(d.scope, Some(Scope::MicroscopeSpecimen));
        assert_eq!(d.strategy, "group:microscope+specimen");
    }

    #[test]
    fn fallback_skips_unknown_metadata() {
        let store = sample_store();
        let (scope, key) = resolve_scope(
            &meta("q", Microscope::Unknown, "dots"),
            &store,
            Scope::MicroscopeSpecimen,
        )
        .unwrap();
        assert_eq!((scope, key), (Scope::Specimen, GroupKey::specimen("dots")));
        let (scope, _) = resolve_scope(
            &meta("q", Microscope::Widefield, "unknown"),
            &store,
            Scope::MicroscopeSpecimen,
        )
        .unwrap();
        assert_eq!(scope, Scope::Microscope);
        let (scope, key) = resolve_scope(
            &meta("q", Microscope::Unknown, "unknown"),
            &store,
            Scope::MicroscopeSpecimen,
        )
        .unwrap();
        assert_eq!((scope, key), (Scope::All, GroupKey::global()));
    }

    #[test]
    fn known_but_empty_group_is_an_error() {
        let store = sample_store();
        let err = resolve_scope(
            &meta("q", Microscope::TwoPhoton, "dots"),
            &store,
            Scope::MicroscopeSpecimen,
        )
        .unwrap_err();
        match err {
            Error::EmptyPool { scope, available } => {
                assert_eq!(scope, "microscope=two_photon,specimen=dots");
                assert!(available.contains("microscope=confocal,specimen=dots"));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(resolve_scope(
            &meta("q", Microscope::TwoPhoton, "x"),
            &store,
            Scope::Microscope
        )
        .is_err());
    }

    #[test]
    fn pools_are_subsets_of_the_global_pool() {
        let store = sample_store();
        let all: Vec<&str> = store.entries.iter().map(|e| e.image_id.as_str()).collect();
        let q = meta("q", Microscope::Confocal, "dots");
        for scope in [
            Scope::All,
            Scope::Microscope,
            Scope::Specimen,
            Scope::MicroscopeSpecimen,
        ] {
            let (_, key) = resolve_scope(&q, &store, scope).unwrap();
            let pool = candidate_pool(&q, &store, scope).unwrap();
            assert!(!pool.is_empty());
            for e in pool {
                assert!(all.contains(&e.image_id.as_str()));
                assert!(key.contains(&e.meta));
            }
        }
        assert_eq!(
            candidate_pool(&q, &store, Scope::All).unwrap().len(),
            store.entries.len()
        );
    }

    #[test]
    fn identical_input_picks_itself() {
        let store = sample_store();
        let img = fake_image("c", Microscope::Widefield, "dots", 3.0);
        for kind in [
            SimilarityKind::Mse,
            SimilarityKind::Mae,
            SimilarityKind::Psnr,
            SimilarityKind::Ssim,
            SimilarityKind::Embedding,
        ] {
            let d = select_config(
                &img.noisy,
                &img.meta,
                &store,
                metric(kind, Scope::All),
                &MultiScaleSsim,
            )
            .unwrap();
            assert_eq!(
                d.source,
                DecisionSource::Image {
                    image_id: "c".into()
                },
                "{kind:?}"
            );
            assert_eq!(d.config, store.entry("c").unwrap().best_combined);
        }
        let d = select_config(
            &img.noisy,
            &img.meta,
            &store,
            metric(SimilarityKind::Mse, Scope::All),
            &MultiScaleSsim,
        )
        .unwrap();
        assert_eq!(d.similarity_value, Some(0.0));
    }

    #[test]
    fn psnr_and_mse_agree() {
        let store = sample_store();
        let pool: Vec<&CalibrationEntry> = store.entries.iter().collect();
        let probe = fingerprint(&Image::from_fn(48, 48, |y, x| {
            ((y * 3 + x * 5) % 17) as f32 / 17.0
        }))
        .unwrap();
        let (by_mse, _) =
            nearest_calibration_image(&probe, &pool, SimilarityKind::Mse, &MultiScaleSsim, None)
                .unwrap();
        let (by_psnr, _) =
            nearest_calibration_image(&probe, &pool, SimilarityKind::Psnr, &MultiScaleSsim, None)
                .unwrap();
        assert_eq!(by_mse, by_psnr);
    }

    #[test]
    fn mean_gradient_uses_absolute_difference() {
        let store = sample_store();
        let pool: Vec<&CalibrationEntry> = store.entries.iter().collect();
        let probe = fingerprint(&Image::from_fn(48, 48, |y, x| ((y + x) % 3) as f32)).unwrap();
        let (idx, value) = nearest_calibration_image(
            &probe,
            &pool,
            SimilarityKind::MeanGradient,
            &MultiScaleSsim,
            None,
        )
        .unwrap();
        let g = mean_gradient(&probe).unwrap();
        let diffs: Vec<f64> = pool
            .iter()
            .map(|e| (g - mean_gradient(&e.fingerprint_image()).unwrap()).abs())
            .collect();
        let min = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(value, min);
        assert_eq!(diffs[idx], min);
    }

    #[test]
    fn embedding_requires_a_model() {
        let mut store = sample_store();
        store.embedding_model = None;
        let img = fake_image("q", Microscope::Confocal, "dots", 5.0);
        let err = select_config(
            &img.noisy,
            &img.meta,
            &store,
            metric(SimilarityKind::Embedding, Scope::All),
            &MultiScaleSsim,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoEmbedding));
    }
}
