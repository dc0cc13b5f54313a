use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::Network;
use super::run::{fidelity, padded, sample_input};
use super::spec::NetworkSpec;
use crate::error::Result;
use crate::nn::Tensor;

const MAX_KINK_REDRAWS: usize = 20;

/// One parameter compared between backpropagation and central differences.
#[derive(Clone, Debug)]
pub struct Probe {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Probe {
    /// `|a − n| / max(|a|, |n|, floor)`.
    pub fn relative_error(&self, floor: f64) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(floor);
        if scale == 0.0 {
            return 0.0;
        }
        (self.analytic - self.numeric).abs() / scale
    }
}

#[derive(Clone, Debug)]
pub struct GradientReport {
    pub probes: Vec<Probe>,
    /// Root mean square of the full analytic gradient.
    pub gradient_rms: f64,
    /// Draws discarded because the perturbation flipped a rectifier.
    pub kinks_skipped: usize,
}

impl GradientReport {
    /// Largest relative error, with denominators floored at the gradient RMS.
    ///
    /// The floor keeps weights whose gradient sits below single-precision resolution of the
    /// loss from dominating the statistic.
    pub fn max_relative_error(&self) -> f64 {
        self.probes
            .iter()
            .map(|p| p.relative_error(self.gradient_rms))
            .fold(0.0, f64::max)
    }

    /// Largest relative error without any floor.
    pub fn max_unfloored_relative_error(&self) -> f64 {
        self.probes
            .iter()
            .map(|p| p.relative_error(0.0))
            .fold(0.0, f64::max)
    }
}

/// Settings for comparing analytic gradients with finite differences on a small problem.
#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub spec: NetworkSpec,
    /// Side length of the random target; the network input is padded as in a real fit.
    pub size: usize,
    pub step: f32,
    pub probes: usize,
    pub seed: u64,
}

/// A network, its fixed input and a random target wired up for loss evaluation.
pub struct Problem {
    pub net: Network,
    input: Tensor,
    target: Vec<f32>,
    size: usize,
}

impl Problem {
    pub fn loss(&self) -> f64 {
        let (out, _) = self.net.forward(&self.input);
        fidelity(&out, &self.target, self.size, self.size, None)
    }

    pub fn gradient(&self) -> Vec<f32> {
        let (out, acts) = self.net.forward(&self.input);
        let mut grad = Tensor::zeros(1, out.height, out.width);
        fidelity(&out, &self.target, self.size, self.size, Some(&mut grad));
        self.net.backward(&self.input, &acts, &grad)
    }

    fn loss_and_pattern(&self) -> (f64, Vec<bool>) {
        let (out, acts) = self.net.forward(&self.input);
        (
            fidelity(&out, &self.target, self.size, self.size, None),
            acts.rectifier_pattern(),
        )
    }

    /// Central difference of the loss along parameter `index`, and whether the two
    /// evaluations straddle a rectifier kink.
    pub fn numeric(&mut self, index: usize, step: f32) -> (f64, bool) {
        let original = self.net.params()[index];
        self.net.params_mut()[index] = original + step;
        let (plus, pattern_plus) = self.loss_and_pattern();
        self.net.params_mut()[index] = original - step;
        let (minus, pattern_minus) = self.loss_and_pattern();
        self.net.params_mut()[index] = original;
        // the perturbation actually applied after f32 rounding
        let span = ((original + step) as f64) - ((original - step) as f64);
        ((plus - minus) / span, pattern_plus != pattern_minus)
    }
}

impl GradientCheck {
    pub fn new(spec: NetworkSpec) -> Self {
        Self {
            spec,
            size: 16,
            step: 1e-3,
            probes: 20,
            seed: 1,
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let net = Network::build(&self.spec)?;
        let side = padded(self.size, self.spec.size_multiple());
        let input = sample_input(self.spec.seed, side, side).tensor;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let target = (0..self.size * self.size).map(|_| rng.random()).collect();
        Ok(Problem {
            net,
            input,
            target,
            size: self.size,
        })
    }

    /// Probes randomly drawn weights and returns the comparisons.
    pub fn run(&self) -> Result<GradientReport> {
        let mut problem = self.problem()?;
        let grads = problem.gradient();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
        let weights: Vec<usize> = problem
            .net
            .layers()
            .iter()
            .flat_map(|layer| layer.weight_range())
            .collect();
        let mut probes = Vec::with_capacity(self.probes);
        let mut kinks_skipped = 0;
        // a difference across a rectifier kink is not a derivative estimate, so such
        // draws are replaced
        while probes.len() < self.probes && kinks_skipped < MAX_KINK_REDRAWS * self.probes.max(1) {
            let index = weights[rng.random_range(0..weights.len())];
            let (numeric, kink) = problem.numeric(index, self.step);
            if kink {
                kinks_skipped += 1;
                continue;
            }
            probes.push(Probe {
                index,
                analytic: grads[index] as f64,
                numeric,
            });
        }
        let gradient_rms =
            (grads.iter().map(|&g| (g as f64).powi(2)).sum::<f64>() / grads.len() as f64).sqrt();
        Ok(GradientReport {
            probes,
            gradient_rms,
            kinks_skipped,
        })
    }
}

/// Maximum relative gradient error over `probe_count` random weights on a 16×16 problem.
pub fn gradient_check(spec: &NetworkSpec, probe_count: usize) -> Result<f64> {
    let check = GradientCheck {
        probes: probe_count,
        ..GradientCheck::new(*spec)
    };
    Ok(check.run()?.max_relative_error())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dip::spec::WidthMode;

    fn small() -> NetworkSpec {
        NetworkSpec::new(4, WidthMode::Uniform(16), true)
    }

    #[test]
    fn twenty_probes_within_tolerance() {
        let report = GradientCheck::new(small()).run().unwrap();
        assert_eq!(report.probes.len(), 20);
        assert!(
            report.max_relative_error() < 1e-2,
            "{}",
            report.max_relative_error()
        );
    }

    #[test]
    fn output_bias_with_zero_output_weights() {
        let check = GradientCheck::new(small());
        let mut problem = check.problem().unwrap();
        let out = problem.net.output_layer();
        problem.net.params_mut()[out.weight_range()].fill(0.0);
        let grads = problem.gradient();
        let index = out.bias_range().start;
        let (numeric, kink) = problem.numeric(index, 1e-3);
        assert!(!kink);
        assert!((grads[index] as f64 - numeric).abs() < 1e-4);
    }

    #[test]
    fn difference_error_is_second_order_for_smooth_probe() {
        // the output bias only shifts logits, so no rectifier can flip
        let mut problem = GradientCheck::new(small()).problem().unwrap();
        let index = problem.net.output_layer().bias_range().start;
        let analytic = problem.gradient()[index] as f64;
        let err = |p: &mut Problem, step: f32| (p.numeric(index, step).0 - analytic).abs();
        let e1 = err(&mut problem, 0.1);
        let e2 = err(&mut problem, 0.2);
        let ratio = e2 / e1;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn public_entry_point() {
        let err = gradient_check(&small(), 5).unwrap();
        assert!(err < 1e-2);
    }
}
