//! Deep image prior fitting: the encoder-decoder generator, its optimizer and the
//! snapshot-recording fit loop.

mod gradcheck;
mod network;
mod optim;
mod run;
mod spec;

pub use gradcheck::{gradient_check, GradientCheck, GradientReport, Probe, Problem};
pub use network::{parameter_count, Activations, ConvLayer, Network, NormLayer};
pub use optim::Adam;
pub use run::{
    dip_denoise, dip_run, sample_input, sample_input_scaled, FixedInput, RunTrace, Snapshot,
    DIVERGENCE_FACTOR,
};
pub use spec::{
    DipConfig, NetworkSpec, RunConfig, WidthMode, INPUT_CHANNELS, MAX_DEPTH, MAX_ITERATIONS,
    MIN_DEPTH, SKIP_CHANNELS, UNIFORM_WIDTHS,
};
