use super::{reflect, Tensor};

/// Geometry of a square-kernel convolution with reflection padding `(kernel - 1) / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvShape {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        assert!(kernel % 2 == 1, "odd kernels only");
        assert!(stride >= 1);
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
        }
    }

    pub fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_channels
    }

    pub fn output_size(&self, height: usize, width: usize) -> (usize, usize) {
        let p = self.pad();
        (
            (height + 2 * p - self.kernel) / self.stride + 1,
            (width + 2 * p - self.kernel) / self.stride + 1,
        )
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }
}

/// Upper bound on the im2col buffer, in floats.
const COLS_BUDGET: usize = 1 << 22;

/// Reflection-padded source indices for every (kernel offset, output position).
fn index_table(shape: &ConvShape, src: usize, out: usize) -> Vec<usize> {
    let k = shape.kernel;
    let p = shape.pad() as isize;
    let mut table = Vec::with_capacity(k * out);
    for ky in 0..k {
        for o in 0..out {
            let i = (o * shape.stride + ky) as isize - p;
            table.push(reflect(i, src));
        }
    }
    table
}

struct Geometry {
    out_h: usize,
    out_w: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    band_rows: usize,
}

impl Geometry {
    fn new(shape: &ConvShape, input: &Tensor) -> Self {
        let (out_h, out_w) = shape.output_size(input.height, input.width);
        let rows = index_table(shape, input.height, out_h);
        let cols = index_table(shape, input.width, out_w);
        let band_rows = (COLS_BUDGET / (shape.patch_len() * out_w).max(1)).clamp(1, out_h);
        Self {
            out_h,
            out_w,
            rows,
            cols,
            band_rows,
        }
    }
}

/// Fills `buf` with the im2col matrix for output rows `[y0, y1)`.
fn im2col(
    shape: &ConvShape,
    input: &Tensor,
    g: &Geometry,
    y0: usize,
    y1: usize,
    buf: &mut Vec<f32>,
) {
    let k = shape.kernel;
    let band = (y1 - y0) * g.out_w;
    buf.clear();
    buf.resize(shape.patch_len() * band, 0.0);
    let plane = input.plane();
    let mut r = 0;
    for c in 0..shape.in_channels {
        let src = &input.data[c * plane..(c + 1) * plane];
        for ky in 0..k {
            let row_idx = &g.rows[ky * g.out_h..(ky + 1) * g.out_h];
            for kx in 0..k {
                let col_idx = &g.cols[kx * g.out_w..(kx + 1) * g.out_w];
                let dst = &mut buf[r * band..(r + 1) * band];
                for (oy, dst_row) in (y0..y1).zip(dst.chunks_exact_mut(g.out_w)) {
                    let line = &src[row_idx[oy] * input.width..(row_idx[oy] + 1) * input.width];
                    for (d, &ix) in dst_row.iter_mut().zip(col_idx) {
                        *d = line[ix];
                    }
                }
                r += 1;
            }
        }
    }
}

/// Scatters an im2col-shaped gradient back onto the input gradient.
fn col2im(
    shape: &ConvShape,
    grad_in: &mut Tensor,
    g: &Geometry,
    y0: usize,
    y1: usize,
    buf: &[f32],
) {
    let k = shape.kernel;
    let band = (y1 - y0) * g.out_w;
    let plane = grad_in.plane();
    let width = grad_in.width;
    let mut r = 0;
    for c in 0..shape.in_channels {
        let dst = &mut grad_in.data[c * plane..(c + 1) * plane];
        for ky in 0..k {
            let row_idx = &g.rows[ky * g.out_h..(ky + 1) * g.out_h];
            for kx in 0..k {
                let col_idx = &g.cols[kx * g.out_w..(kx + 1) * g.out_w];
                let src = &buf[r * band..(r + 1) * band];
                for (oy, src_row) in (y0..y1).zip(src.chunks_exact(g.out_w)) {
                    let line = &mut dst[row_idx[oy] * width..(row_idx[oy] + 1) * width];
                    for (&v, &ix) in src_row.iter().zip(col_idx) {
                        line[ix] += v;
                    }
                }
                r += 1;
            }
        }
    }
}

/// `C[m×n] = A[m×k]·B[k×n] + beta·C` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    rsa: usize,
    csa: usize,
    b: &[f32],
    rsb: usize,
    csb: usize,
    beta: f32,
    c: &mut [f32],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() > (m - 1) * rsc + (n - 1) * csc);
    // SAFETY: the asserts above keep every strided access inside the slices, and `c`
    // is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Convolution forward pass. `weight` is `[out][in][k][k]`, `bias` is `[out]`.
pub fn conv_forward(
    input: &Tensor,
    shape: &ConvShape,
    weight: &[f32],
    bias: &[f32],
    scratch: &mut Vec<f32>,
) -> Tensor {
    assert_eq!(input.channels, shape.in_channels, "conv input channels");
    assert_eq!(weight.len(), shape.weight_len());
    assert_eq!(bias.len(), shape.out_channels);
    let g = Geometry::new(shape, input);
    let total = g.out_h * g.out_w;
    let kk = shape.patch_len();
    let mut out = Tensor::zeros(shape.out_channels, g.out_h, g.out_w);
    if shape.is_pointwise() {
        gemm(
            shape.out_channels,
            kk,
            total,
            weight,
            kk,
            1,
            &input.data,
            total,
            1,
            0.0,
            &mut out.data,
            total,
            1,
        );
    } else {
        let mut y0 = 0;
        while y0 < g.out_h {
            let y1 = (y0 + g.band_rows).min(g.out_h);
            im2col(shape, input, &g, y0, y1, scratch);
            let band = (y1 - y0) * g.out_w;
            let off = y0 * g.out_w;
            gemm(
                shape.out_channels,
                kk,
                band,
                weight,
                kk,
                1,
                scratch,
                band,
                1,
                0.0,
                &mut out.data[off..],
                total,
                1,
            );
            y0 = y1;
        }
    }
    for (o, plane) in out.data.chunks_exact_mut(total).enumerate() {
        let b = bias[o];
        for v in plane {
            *v += b;
        }
    }
    out
}

/// Convolution backward pass.
///
/// Accumulates into `grad_weight` and `grad_bias`; returns the input gradient when
/// `need_input_grad` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    input: &Tensor,
    shape: &ConvShape,
    weight: &[f32],
    grad_out: &Tensor,
    grad_weight: &mut [f32],
    grad_bias: &mut [f32],
    need_input_grad: bool,
    scratch: &mut Vec<f32>,
) -> Option<Tensor> {
    let g = Geometry::new(shape, input);
    let total = g.out_h * g.out_w;
    let kk = shape.patch_len();
    let oc = shape.out_channels;
    assert_eq!(
        (grad_out.channels, grad_out.height, grad_out.width),
        (oc, g.out_h, g.out_w)
    );
    assert_eq!(grad_weight.len(), shape.weight_len());

    for (gb, plane) in grad_bias.iter_mut().zip(grad_out.data.chunks_exact(total)) {
        *gb += plane.iter().map(|&v| v as f64).sum::<f64>() as f32;
    }

    if shape.is_pointwise() {
        // dW += dY · Xᵀ
        gemm(
            oc,
            total,
            kk,
            &grad_out.data,
            total,
            1,
            &input.data,
            1,
            total,
            1.0,
            grad_weight,
            kk,
            1,
        );
        if !need_input_grad {
            return None;
        }
        let mut grad_in = Tensor::zeros(input.channels, input.height, input.width);
        // dX = Wᵀ · dY
        gemm(
            kk,
            oc,
            total,
            weight,
            1,
            kk,
            &grad_out.data,
            total,
            1,
            0.0,
            &mut grad_in.data,
            total,
            1,
        );
        return Some(grad_in);
    }

    let mut grad_in =
        need_input_grad.then(|| Tensor::zeros(input.channels, input.height, input.width));
    let mut dcols = Vec::new();
    let mut y0 = 0;
    while y0 < g.out_h {
        let y1 = (y0 + g.band_rows).min(g.out_h);
        let band = (y1 - y0) * g.out_w;
        let off = y0 * g.out_w;
        im2col(shape, input, &g, y0, y1, scratch);
        gemm(
            oc,
            band,
            kk,
            &grad_out.data[off..],
            total,
            1,
            scratch,
            1,
            band,
            1.0,
            grad_weight,
            kk,
            1,
        );
        if let Some(gi) = grad_in.as_mut() {
            dcols.clear();
            dcols.resize(kk * band, 0.0);
            gemm(
                kk,
                oc,
                band,
                weight,
                1,
                kk,
                &grad_out.data[off..],
                total,
                1,
                0.0,
                &mut dcols,
                band,
                1,
            );
            col2im(shape, gi, &g, y0, y1, &dcols);
        }
        y0 = y1;
    }
    grad_in
}
