//! Exhaustive grid search over architectures and stopping points on calibration
//! images, per-image and per-group optima, and the persisted calibration store.

#[cfg(test)]
pub(crate) mod fixtures;
mod grid;
mod select;
mod space;
mod store;

pub use grid::{calibrate_image, CalibrationOptions, FailedRun, GridResult, ImageGrid};
pub use select::{best_combined, best_per_measure, group_best, image_rank_sums, GroupObjective};
pub use space::{enumerate_search_space, SearchSpace, CHECKPOINT_STRIDE};
pub use store::{
    build_store, load_store, save_store, CalibratedImage, CalibrationEntry, CalibrationStore,
    GroupKey, STORE_FORMAT_VERSION,
};
