use super::Tensor;

pub const NORM_EPS: f64 = 1e-5;

/// Values kept from a normalization forward pass for its backward pass.
#[derive(Clone, Debug)]
pub struct NormCache {
    pub normalized: Tensor,
    pub inv_std: f32,
}

/// Normalizes the whole tensor to zero mean and unit variance, then applies a
/// per-channel scale and shift.
///
/// Statistics span all channels and pixels, so a 1×1 feature map is still normalized
/// meaningfully.
pub fn norm_forward(input: &Tensor, gamma: &[f32], beta: &[f32]) -> (Tensor, NormCache) {
    assert_eq!(gamma.len(), input.channels);
    assert_eq!(beta.len(), input.channels);
    let n = input.data.len() as f64;
    let mean = input.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = input
        .data
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let istd = 1.0 / (var + NORM_EPS).sqrt();
    let plane = input.plane();
    let mut out = Tensor::zeros(input.channels, input.height, input.width);
    let mut normalized = Tensor::zeros(input.channels, input.height, input.width);
    for c in 0..input.channels {
        let range = c * plane..(c + 1) * plane;
        let src = &input.data[range.clone()];
        let xhat = &mut normalized.data[range.clone()];
        let dst = &mut out.data[range];
        for ((x, o), &v) in xhat.iter_mut().zip(dst.iter_mut()).zip(src) {
            *x = ((v as f64 - mean) * istd) as f32;
            *o = gamma[c] * *x + beta[c];
        }
    }
    (
        out,
        NormCache {
            normalized,
            inv_std: istd as f32,
        },
    )
}

/// Backward of [`norm_forward`]; accumulates into `grad_gamma`/`grad_beta` and returns the input gradient.
pub fn norm_backward(
    cache: &NormCache,
    gamma: &[f32],
    grad_out: &Tensor,
    grad_gamma: &mut [f32],
    grad_beta: &mut [f32],
) -> Tensor {
    let xh = &cache.normalized;
    assert_eq!(xh.data.len(), grad_out.data.len());
    let plane = xh.plane();
    let n = xh.data.len() as f64;
    let mut sum_g = 0.0f64;
    let mut sum_gx = 0.0f64;
    for c in 0..xh.channels {
        let g = &grad_out.data[c * plane..(c + 1) * plane];
        let x = &xh.data[c * plane..(c + 1) * plane];
        let sg: f64 = g.iter().map(|&v| v as f64).sum();
        let sgx: f64 = g.iter().zip(x).map(|(&a, &b)| a as f64 * b as f64).sum();
        grad_gamma[c] += sgx as f32;
        grad_beta[c] += sg as f32;
        sum_g += gamma[c] as f64 * sg;
        sum_gx += gamma[c] as f64 * sgx;
    }
    let scale = cache.inv_std as f64 / n;
    let mut grad_in = Tensor::zeros(xh.channels, xh.height, xh.width);
    for (c, &gc) in gamma.iter().enumerate() {
        let range = c * plane..(c + 1) * plane;
        let g = &grad_out.data[range.clone()];
        let x = &xh.data[range.clone()];
        let gc = gc as f64;
        for ((d, &gv), &xv) in grad_in.data[range].iter_mut().zip(g).zip(x) {
            *d = (scale * (n * gc * gv as f64 - sum_g - xv as f64 * sum_gx)) as f32;
        }
    }
    grad_in
}
