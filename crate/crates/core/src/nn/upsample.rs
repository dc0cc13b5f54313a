use super::Tensor;

/// Half-pixel-centred bilinear taps for doubling an axis of length `n`.
fn taps(n: usize) -> Vec<(usize, usize, f32, f32)> {
    (0..2 * n)
        .map(|o| {
            let src = ((o as f32 + 0.5) * 0.5 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            let l1 = src - i0 as f32;
            (i0, i1, 1.0 - l1, l1)
        })
        .collect()
}

/// Bilinear ×2 upsampling per channel.
pub fn upsample2x_forward(input: &Tensor) -> Tensor {
    let (h, w) = (input.height, input.width);
    let rows = taps(h);
    let cols = taps(w);
    let mut out = Tensor::zeros(input.channels, 2 * h, 2 * w);
    let (oh, ow) = (2 * h, 2 * w);
    for c in 0..input.channels {
        let src = &input.data[c * h * w..(c + 1) * h * w];
        let dst = &mut out.data[c * oh * ow..(c + 1) * oh * ow];
        for (oy, &(y0, y1, wy0, wy1)) in rows.iter().enumerate() {
            let r0 = &src[y0 * w..(y0 + 1) * w];
            let r1 = &src[y1 * w..(y1 + 1) * w];
            let line = &mut dst[oy * ow..(oy + 1) * ow];
            for (d, &(x0, x1, wx0, wx1)) in line.iter_mut().zip(&cols) {
                *d = wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
            }
        }
    }
    out
}

/// Adjoint of [`upsample2x_forward`]: maps a `2h×2w` gradient to `h×w`.
pub fn upsample2x_backward(grad_out: &Tensor) -> Tensor {
    let (oh, ow) = (grad_out.height, grad_out.width);
    assert!(oh % 2 == 0 && ow % 2 == 0);
    let (h, w) = (oh / 2, ow / 2);
    let rows = taps(h);
    let cols = taps(w);
    let mut out = Tensor::zeros(grad_out.channels, h, w);
    for c in 0..grad_out.channels {
        let src = &grad_out.data[c * oh * ow..(c + 1) * oh * ow];
        let dst = &mut out.data[c * h * w..(c + 1) * h * w];
        for (oy, &(y0, y1, wy0, wy1)) in rows.iter().enumerate() {
            let line = &src[oy * ow..(oy + 1) * ow];
            for (&g, &(x0, x1, wx0, wx1)) in line.iter().zip(&cols) {
                dst[y0 * w + x0] += wy0 * wx0 * g;
                dst[y0 * w + x1] += wy0 * wx1 * g;
                dst[y1 * w + x0] += wy1 * wx0 * g;
                dst[y1 * w + x1] += wy1 * wx1 * g;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let t = Tensor::from_vec(1, 3, 2, vec![2.0; 6]);
        let u = upsample2x_forward(&t);
        assert_eq!((u.height, u.width), (6, 4));
        assert!(u.data.iter().all(|&v| (v - 2.0).abs() < 1e-6));
    }

    #[test]
    fn known_weights() {
        // 1-D ramp [0, 1] doubles to [0, 0.25, 0.75, 1] with half-pixel centres
        let t = Tensor::from_vec(1, 1, 2, vec![0.0, 1.0]);
        let u = upsample2x_forward(&t);
        assert_eq!(u.data[..4], [0.0, 0.25, 0.75, 1.0]);
        assert_eq!(u.data[4..], [0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn adjoint_identity() {
        let x = Tensor::from_vec(
            2,
            3,
            4,
            (0..24).map(|i| ((i * 7) % 5) as f32 - 2.0).collect(),
        );
        let g = Tensor::from_vec(
            2,
            6,
            8,
            (0..96).map(|i| ((i * 3) % 11) as f32 * 0.1).collect(),
        );
        let lhs: f32 = upsample2x_forward(&x)
            .data
            .iter()
            .zip(&g.data)
            .map(|(a, b)| a * b)
            .sum();
        let rhs: f32 = x
            .data
            .iter()
            .zip(&upsample2x_backward(&g).data)
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-4);
    }

    #[test]
    fn single_pixel() {
        let t = Tensor::from_vec(1, 1, 1, vec![3.0]);
        assert_eq!(upsample2x_forward(&t).data, vec![3.0; 4]);
    }
}
