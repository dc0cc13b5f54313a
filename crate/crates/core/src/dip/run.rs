use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::{sigmoid, Network};
use super::optim::Adam;
use super::spec::{NetworkSpec, RunConfig, INPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::Tensor;

/// Loss growth over the first iteration's loss that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// The fixed random tensor fed to the generator for the whole fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedInput {
    pub seed: u64,
    pub tensor: Tensor,
}

/// Draws a `32 × height × width` input uniformly from `[0, scale)`.
///
/// Uses a different stream than weight initialization so input and weights stay
/// independent for the same seed.
pub fn sample_input_scaled(seed: u64, height: usize, width: usize, scale: f32) -> FixedInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let data = (0..INPUT_CHANNELS * height * width)
        .map(|_| rng.random::<f32>() * scale)
        .collect();
    FixedInput {
        seed,
        tensor: Tensor::from_vec(INPUT_CHANNELS, height, width, data),
    }
}

pub fn sample_input(seed: u64, height: usize, width: usize) -> FixedInput {
    sample_input_scaled(seed, height, width, RunConfig::default().input_noise_scale)
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub iteration: usize,
    pub output: Image,
}

/// Everything recorded during one fit.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub spec: NetworkSpec,
    pub config: RunConfig,
    pub snapshots: Vec<Snapshot>,
    /// Loss of every iteration, index 0 being iteration 1.
    pub loss_curve: Vec<f64>,
    pub wall_time_secs: f64,
}

#[derive(Serialize)]
struct TraceDump<'a> {
    spec: &'a NetworkSpec,
    config: &'a RunConfig,
    snapshot_iterations: Vec<usize>,
    loss_curve: &'a [f64],
    wall_time_secs: f64,
}

impl RunTrace {
    pub fn snapshot_at(&self, iteration: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.iteration == iteration)
    }

    /// JSON with the loss curve and snapshot iterations (pixel data omitted).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TraceDump {
            spec: &self.spec,
            config: &self.config,
            snapshot_iterations: self.snapshots.iter().map(|s| s.iteration).collect(),
            loss_curve: &self.loss_curve,
            wall_time_secs: self.wall_time_secs,
        })?)
    }
}

pub(crate) fn padded(n: usize, multiple: usize) -> usize {
    n.div_ceil(multiple) * multiple
}

/// Mean squared error between the sigmoid of the top-left `h`×`w` crop of `logits`
/// and `target`, evaluated in double precision.
///
/// When `grad` is given (same padded shape as `logits`) it receives d loss / d logits,
/// zero outside the crop.
pub(crate) fn fidelity(
    logits: &Tensor,
    target: &[f32],
    h: usize,
    w: usize,
    mut grad: Option<&mut Tensor>,
) -> f64 {
    let pw = logits.width;
    let n = (h * w) as f64;
    let mut loss = 0.0f64;
    for y in 0..h {
        let lrow = &logits.data[y * pw..y * pw + w];
        let trow = &target[y * w..(y + 1) * w];
        for (x, (&l, &t)) in lrow.iter().zip(trow).enumerate() {
            let s = sigmoid(l as f64);
            let diff = s - t as f64;
            loss += diff * diff;
            if let Some(g) = grad.as_deref_mut() {
                g.data[y * pw + x] = (2.0 * diff * s * (1.0 - s) / n) as f32;
            }
        }
    }
    loss / n
}

/// Sigmoid of the top-left `h`×`w` crop of `logits`.
fn image_from_logits(logits: &Tensor, h: usize, w: usize) -> Result<Image> {
    let pw = logits.width;
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        data.extend(
            logits.data[y * pw..y * pw + w]
                .iter()
                .map(|&l| sigmoid(l as f64) as f32),
        );
    }
    Image::new(h, w, 1, data)
}

/// Fits a freshly initialized network to `noisy` and records snapshots every
/// `checkpoint_stride` iterations.
///
/// The snapshot at iteration k is the network output computed in iteration k, i.e.
/// after k − 1 parameter updates. Snapshots are not clamped.
pub fn dip_run(noisy: &Image, spec: &NetworkSpec, config: &RunConfig) -> Result<RunTrace> {
    noisy.ensure_single_channel("dip_run")?;
    config.validate()?;
    let (h, w) = (noisy.height(), noisy.width());
    if h == 0 || w == 0 {
        return Err(Error::TooSmall("empty image".into()));
    }
    let start = Instant::now();
    let mut net = Network::build(spec)?;
    let m = spec.size_multiple();
    let (ph, pw) = (padded(h, m), padded(w, m));
    let input = sample_input_scaled(spec.seed, ph, pw, config.input_noise_scale).tensor;
    let mut adam = Adam::new(net.parameter_count(), config.learning_rate);
    let target = noisy.data();

    let mut loss_curve = Vec::with_capacity(config.max_iterations);
    let mut snapshots = Vec::with_capacity(config.max_iterations / config.checkpoint_stride);
    let mut grad = Tensor::zeros(1, ph, pw);
    for iteration in 1..=config.max_iterations {
        let (out, acts) = net.forward(&input);
        let loss = fidelity(&out, target, h, w, Some(&mut grad));
        let initial = loss_curve.first().copied().unwrap_or(loss);
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * initial {
            return Err(Error::Diverged { iteration, loss });
        }
        loss_curve.push(loss);
        if iteration % config.checkpoint_stride == 0 {
            snapshots.push(Snapshot {
                iteration,
                output: image_from_logits(&out, h, w)?,
            });
        }
        if iteration == config.max_iterations {
            break;
        }
        let grads = net.backward(&input, &acts, &grad);
        adam.step(net.params_mut(), &grads);
    }
    Ok(RunTrace {
        spec: *spec,
        config: *config,
        snapshots,
        loss_curve,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Fits for exactly `stop_iteration` iterations and returns the final output clamped to [0, 1].
///
/// Learning rate and input scale come from `config`; its iteration settings are ignored.
pub fn dip_denoise(
    noisy: &Image,
    spec: &NetworkSpec,
    stop_iteration: usize,
    config: &RunConfig,
) -> Result<Image> {
    let config = RunConfig {
        max_iterations: stop_iteration,
        checkpoint_stride: stop_iteration.max(1),
        ..*config
    };
    let trace = dip_run(noisy, spec, &config)?;
    let last = trace
        .snapshots
        .into_iter()
        .next_back()
        .expect("one snapshot at the stop iteration");
    Ok(last.output.clamped(0.0, 1.0))
}
