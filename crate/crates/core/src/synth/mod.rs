//! Seeded synthetic phantoms, frame-averaged Poisson-Gaussian noise and labelled
//! datasets for calibration and validation without external data.

mod dataset;
mod noise;
mod phantom;

pub use dataset::{build_synthetic_dataset, regime_microscope, DatasetSpec, Split, SyntheticItem};
pub use noise::{apply_noise, NoiseModel};
pub use phantom::{generate_phantom, PhantomKind, MIN_PHANTOM_SIZE};
