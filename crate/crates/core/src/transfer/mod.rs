//! Choosing a configuration for an unseen image from the calibration store, and the
//! end-to-end denoising pipeline.

mod embedding;
mod fingerprint;
mod pipeline;
mod select;
mod strategy;

pub use embedding::{euclidean, EmbeddingModel, EMBEDDING_DIMS};
pub use fingerprint::{fingerprint, FINGERPRINT_SIZE};
pub use pipeline::{
    auto_denoise, baseline_config, denoise_with_config, DenoiseOptions, DenoiseStats,
    BASELINE_ITERATION,
};
pub use select::{
    candidate_pool, nearest_calibration_image, resolve_scope, select_config,
    select_config_for_fingerprint, DecisionSource, TransferDecision,
};
pub use strategy::{Scope, SimilarityKind, TransferStrategy};
