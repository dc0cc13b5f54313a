use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{NetworkSpec, INPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::nn::{
    conv_backward, conv_forward, leaky_relu_backward_inplace, leaky_relu_inplace, norm_backward,
    norm_forward, upsample2x_backward, upsample2x_forward, ConvShape, NormCache, Tensor,
    LEAKY_SLOPE,
};

/// A convolution and the position of its parameters in the flat parameter vector.
///
/// Weights occupy `offset..offset + shape.weight_len()`, biases follow directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayer {
    pub shape: ConvShape,
    pub offset: usize,
}

impl ConvLayer {
    pub fn weight_range(&self) -> Range<usize> {
        self.offset..self.offset + self.shape.weight_len()
    }

    pub fn bias_range(&self) -> Range<usize> {
        let start = self.offset + self.shape.weight_len();
        start..start + self.shape.out_channels
    }

    fn grads<'a>(&self, grads: &'a mut [f32]) -> (&'a mut [f32], &'a mut [f32]) {
        let region = &mut grads[self.offset..self.offset + self.shape.param_len()];
        region.split_at_mut(self.shape.weight_len())
    }
}

/// Scale and shift of a normalization layer: `channels` scales followed by `channels` shifts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormLayer {
    pub channels: usize,
    pub offset: usize,
}

impl NormLayer {
    pub fn scale_range(&self) -> Range<usize> {
        self.offset..self.offset + self.channels
    }

    pub fn shift_range(&self) -> Range<usize> {
        self.offset + self.channels..self.offset + 2 * self.channels
    }

    fn grads<'a>(&self, grads: &'a mut [f32]) -> (&'a mut [f32], &'a mut [f32]) {
        grads[self.offset..self.offset + 2 * self.channels].split_at_mut(self.channels)
    }
}

/// Convolution, normalization, leaky rectifier.
#[derive(Clone, Copy, Debug)]
struct Unit {
    conv: ConvLayer,
    norm: NormLayer,
}

struct UnitCache {
    norm: NormCache,
    out: Tensor,
}

#[derive(Clone, Debug)]
struct Level {
    skip: Option<Unit>,
    down1: Unit,
    down2: Unit,
    up1: Unit,
    up2: Unit,
}

/// Skip-connected encoder-decoder used as the image generator.
///
/// Level `l` (shallowest first) downsamples with a stride-2 3×3 convolution followed by
/// a 3×3 convolution; the decoder mirrors it with bilinear ×2 upsampling, an optional
/// concatenation of the 4-channel 1×1 skip tap taken from that level's input, a 3×3
/// and a 1×1 convolution. Every convolution except the final 1×1 projection to one
/// channel is followed by layer-wide normalization with a per-channel affine map and a
/// leaky rectifier. The projection yields logits that map to intensities through a
/// logistic sigmoid.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    levels: Vec<Level>,
    output: ConvLayer,
    params: Vec<f32>,
}

/// Intermediate tensors kept for the backward pass.
pub struct Activations {
    skip: Vec<Option<UnitCache>>,
    down1: Vec<UnitCache>,
    encoded: Vec<UnitCache>,
    concat: Vec<Option<Tensor>>,
    up1: Vec<Option<UnitCache>>,
    decoded: Vec<Option<UnitCache>>,
}

impl Activations {
    fn units(&self) -> impl Iterator<Item = &UnitCache> {
        self.skip
            .iter()
            .flatten()
            .chain(&self.down1)
            .chain(&self.encoded)
            .chain(self.up1.iter().flatten())
            .chain(self.decoded.iter().flatten())
    }

    /// Which rectifier inputs are positive, over every hidden unit.
    pub fn rectifier_pattern(&self) -> Vec<bool> {
        self.units()
            .flat_map(|u| u.out.data.iter().map(|&v| v > 0.0))
            .collect()
    }
}

struct LayerAlloc {
    next: usize,
}

impl LayerAlloc {
    fn unit(&mut self, in_ch: usize, out_ch: usize, kernel: usize, stride: usize) -> Unit {
        let conv = self.conv(in_ch, out_ch, kernel, stride);
        let norm = NormLayer {
            channels: out_ch,
            offset: self.next,
        };
        self.next += 2 * out_ch;
        Unit { conv, norm }
    }

    fn conv(&mut self, in_ch: usize, out_ch: usize, kernel: usize, stride: usize) -> ConvLayer {
        let shape = ConvShape::new(in_ch, out_ch, kernel, stride);
        let layer = ConvLayer {
            shape,
            offset: self.next,
        };
        self.next += shape.param_len();
        layer
    }
}

impl Network {
    /// Builds the network for `spec` with deterministic weights drawn from `spec.seed`.
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let widths = spec.level_widths();
        let skip_ch = spec.skip_channels();
        let mut alloc = LayerAlloc { next: 0 };
        let mut levels = Vec::with_capacity(spec.depth);
        for (l, &w) in widths.iter().enumerate() {
            let in_ch = if l == 0 {
                INPUT_CHANNELS
            } else {
                widths[l - 1]
            };
            // the decoder of this level receives the upsampled output of the level below
            let deeper_ch = if l + 1 == spec.depth {
                w
            } else {
                widths[l + 1]
            };
            let skip = spec.skip.then(|| alloc.unit(in_ch, skip_ch, 1, 1));
            let down1 = alloc.unit(in_ch, w, 3, 2);
            let down2 = alloc.unit(w, w, 3, 1);
            let up1 = alloc.unit(skip_ch + deeper_ch, w, 3, 1);
            let up2 = alloc.unit(w, w, 1, 1);
            levels.push(Level {
                skip,
                down1,
                down2,
                up1,
                up2,
            });
        }
        let output = alloc.conv(widths[0], 1, 1, 1);
        let mut net = Network {
            spec: *spec,
            levels,
            output,
            params: vec![0.0; alloc.next],
        };
        net.initialize();
        Ok(net)
    }

    fn initialize(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        let hidden_gain = (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt();
        for layer in self.layers() {
            let fan_in = (layer.shape.in_channels * layer.shape.kernel * layer.shape.kernel) as f32;
            let gain = if layer == self.output {
                1.0
            } else {
                hidden_gain
            };
            let normal = Normal::new(0.0, gain / fan_in.sqrt()).expect("positive std");
            for v in &mut self.params[layer.weight_range()] {
                *v = normal.sample(&mut rng);
            }
            self.params[layer.bias_range()].fill(0.0);
        }
        for norm in self.norm_layers() {
            self.params[norm.scale_range()].fill(1.0);
            self.params[norm.shift_range()].fill(0.0);
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn units(&self) -> Vec<Unit> {
        let mut out = Vec::new();
        for lv in &self.levels {
            out.extend(lv.skip);
            out.extend([lv.down1, lv.down2, lv.up1, lv.up2]);
        }
        out
    }

    /// Every convolution in construction order, ending with the output projection.
    pub fn layers(&self) -> Vec<ConvLayer> {
        let mut out: Vec<ConvLayer> = self.units().iter().map(|u| u.conv).collect();
        out.push(self.output);
        out
    }

    pub fn norm_layers(&self) -> Vec<NormLayer> {
        self.units().iter().map(|u| u.norm).collect()
    }

    pub fn output_layer(&self) -> ConvLayer {
        self.output
    }

    /// Shape propagation without arithmetic; errors if the level geometry does not line up.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        let mut dims = Vec::with_capacity(self.levels.len() + 1);
        let (mut h, mut w) = (height, width);
        dims.push((h, w));
        for lv in &self.levels {
            let (h1, w1) = lv.down1.conv.shape.output_size(h, w);
            (h, w) = lv.down2.conv.shape.output_size(h1, w1);
            dims.push((h, w));
        }
        let mut cur = dims[self.levels.len()];
        for (l, lv) in self.levels.iter().enumerate().rev() {
            let up = (cur.0 * 2, cur.1 * 2);
            if up != dims[l] {
                return Err(Error::DimensionMismatch(format!(
                    "level {l}: upsampled {up:?} does not match skip resolution {:?}",
                    dims[l]
                )));
            }
            let after1 = lv.up1.conv.shape.output_size(up.0, up.1);
            cur = lv.up2.conv.shape.output_size(after1.0, after1.1);
        }
        let (oh, ow) = self.output.shape.output_size(cur.0, cur.1);
        Ok((self.output.shape.out_channels, oh, ow))
    }

    fn unit_forward(&self, unit: &Unit, input: &Tensor, scratch: &mut Vec<f32>) -> UnitCache {
        let p = &self.params;
        let conv = &unit.conv;
        let pre = conv_forward(
            input,
            &conv.shape,
            &p[conv.weight_range()],
            &p[conv.bias_range()],
            scratch,
        );
        let (mut out, norm) = norm_forward(
            &pre,
            &p[unit.norm.scale_range()],
            &p[unit.norm.shift_range()],
        );
        leaky_relu_inplace(&mut out);
        UnitCache { norm, out }
    }

    #[allow(clippy::too_many_arguments)]
    fn unit_backward(
        &self,
        unit: &Unit,
        input: &Tensor,
        cache: &UnitCache,
        mut grad: Tensor,
        grads: &mut [f32],
        need_input: bool,
        scratch: &mut Vec<f32>,
    ) -> Option<Tensor> {
        let p = &self.params;
        leaky_relu_backward_inplace(&cache.out, &mut grad);
        let (gg, gb) = unit.norm.grads(grads);
        let grad_pre = norm_backward(&cache.norm, &p[unit.norm.scale_range()], &grad, gg, gb);
        let (gw, gbias) = unit.conv.grads(grads);
        conv_backward(
            input,
            &unit.conv.shape,
            &p[unit.conv.weight_range()],
            &grad_pre,
            gw,
            gbias,
            need_input,
            scratch,
        )
    }

    /// Runs the generator; returns the single-channel logits and the cached activations.
    ///
    /// The image is the logistic sigmoid of the logits, see [`sigmoid`].
    pub fn forward(&self, input: &Tensor) -> (Tensor, Activations) {
        let d = self.levels.len();
        let mut scratch = Vec::new();
        let mut acts = Activations {
            skip: Vec::with_capacity(d),
            down1: Vec::with_capacity(d),
            encoded: Vec::with_capacity(d),
            concat: (0..d).map(|_| None).collect(),
            up1: (0..d).map(|_| None).collect(),
            decoded: (0..d).map(|_| None).collect(),
        };
        for (l, lv) in self.levels.iter().enumerate() {
            let x = if l == 0 {
                input
            } else {
                &acts.encoded[l - 1].out
            };
            let s = lv.skip.map(|u| self.unit_forward(&u, x, &mut scratch));
            let a = self.unit_forward(&lv.down1, x, &mut scratch);
            let b = self.unit_forward(&lv.down2, &a.out, &mut scratch);
            acts.skip.push(s);
            acts.down1.push(a);
            acts.encoded.push(b);
        }
        for (l, lv) in self.levels.iter().enumerate().rev() {
            let deeper = if l + 1 == d {
                &acts.encoded[l].out
            } else {
                &acts.decoded[l + 1]
                    .as_ref()
                    .expect("deeper level decoded")
                    .out
            };
            let up = upsample2x_forward(deeper);
            let cat = match &acts.skip[l] {
                Some(s) => s.out.concat(&up),
                None => up,
            };
            let e = self.unit_forward(&lv.up1, &cat, &mut scratch);
            let y = self.unit_forward(&lv.up2, &e.out, &mut scratch);
            acts.concat[l] = Some(cat);
            acts.up1[l] = Some(e);
            acts.decoded[l] = Some(y);
        }
        let top = &acts.decoded[0].as_ref().expect("top level decoded").out;
        let out = conv_forward(
            top,
            &self.output.shape,
            &self.params[self.output.weight_range()],
            &self.params[self.output.bias_range()],
            &mut scratch,
        );
        (out, acts)
    }

    /// Gradient of the loss with respect to every parameter, given `d loss / d logits`.
    pub fn backward(&self, input: &Tensor, acts: &Activations, grad_logits: &Tensor) -> Vec<f32> {
        let d = self.levels.len();
        let mut grads = vec![0.0f32; self.params.len()];
        let mut scratch = Vec::new();
        let decoded = |l: usize| acts.decoded[l].as_ref().expect("forward ran");

        let (gw, gb) = self.output.grads(&mut grads);
        let mut g = conv_backward(
            &decoded(0).out,
            &self.output.shape,
            &self.params[self.output.weight_range()],
            grad_logits,
            gw,
            gb,
            true,
            &mut scratch,
        )
        .expect("input gradient requested");

        let mut skip_grads: Vec<Option<Tensor>> = (0..d).map(|_| None).collect();
        for (l, lv) in self.levels.iter().enumerate() {
            let e = acts.up1[l].as_ref().expect("forward ran");
            let cat = acts.concat[l].as_ref().expect("forward ran");
            let ge = self
                .unit_backward(
                    &lv.up2,
                    &e.out,
                    decoded(l),
                    g,
                    &mut grads,
                    true,
                    &mut scratch,
                )
                .expect("input gradient requested");
            let gc = self
                .unit_backward(&lv.up1, cat, e, ge, &mut grads, true, &mut scratch)
                .expect("input gradient requested");
            let gu = if lv.skip.is_some() {
                let (gs, gu) = gc.split(self.spec.skip_channels());
                skip_grads[l] = Some(gs);
                gu
            } else {
                gc
            };
            g = upsample2x_backward(&gu);
        }

        // g now holds the gradient of the deepest encoder output
        for (l, lv) in self.levels.iter().enumerate().rev() {
            let x = if l == 0 {
                input
            } else {
                &acts.encoded[l - 1].out
            };
            let need_input = l > 0;
            let ga = self
                .unit_backward(
                    &lv.down2,
                    &acts.down1[l].out,
                    &acts.encoded[l],
                    g,
                    &mut grads,
                    true,
                    &mut scratch,
                )
                .expect("input gradient requested");
            let mut gx = self.unit_backward(
                &lv.down1,
                x,
                &acts.down1[l],
                ga,
                &mut grads,
                need_input,
                &mut scratch,
            );
            if let (Some(unit), Some(gs)) = (lv.skip, skip_grads[l].take()) {
                let cache = acts.skip[l].as_ref().expect("skip activation cached");
                let gx_skip =
                    self.unit_backward(&unit, x, cache, gs, &mut grads, need_input, &mut scratch);
                if let (Some(acc), Some(extra)) = (gx.as_mut(), gx_skip.as_ref()) {
                    acc.add_assign(extra);
                }
            }
            match gx {
                Some(next) => g = next,
                None => break,
            }
        }
        grads
    }
}

pub fn sigmoid(logit: f64) -> f64 {
    1.0 / (1.0 + (-logit).exp())
}

/// Number of learnable parameters of the network built from `spec`.
pub fn parameter_count(spec: &NetworkSpec) -> Result<usize> {
    Ok(Network::build(spec)?.parameter_count())
}
