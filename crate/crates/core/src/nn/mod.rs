//! Single-sample CHW tensors and the convolution kernels used by the DIP network
//! and the learned perceptual backend.
//!
//! All kernels are single-threaded with a fixed reduction order, so identical inputs
//! give bit-identical outputs.

mod conv;
mod norm;
mod upsample;

pub use conv::{conv_backward, conv_forward, ConvShape};
pub use norm::{norm_backward, norm_forward, NormCache, NORM_EPS};
pub use upsample::{upsample2x_backward, upsample2x_forward};

/// A dense `channels × height × width` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Stacks `self` on top of `other` along the channel axis.
    pub fn concat(&self, other: &Tensor) -> Tensor {
        assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor::from_vec(
            self.channels + other.channels,
            self.height,
            self.width,
            data,
        )
    }

    /// Splits off the first `head` channels.
    pub fn split(self, head: usize) -> (Tensor, Tensor) {
        assert!(head <= self.channels);
        let at = head * self.plane();
        let mut data = self.data;
        let tail = data.split_off(at);
        (
            Tensor::from_vec(head, self.height, self.width, data),
            Tensor::from_vec(self.channels - head, self.height, self.width, tail),
        )
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

pub const LEAKY_SLOPE: f32 = 0.2;

pub fn leaky_relu_inplace(t: &mut Tensor) {
    for v in &mut t.data {
        if *v < 0.0 {
            *v *= LEAKY_SLOPE;
        }
    }
}

/// Multiplies `grad` by the leaky-rectifier derivative, read off the activation output.
pub fn leaky_relu_backward_inplace(activated: &Tensor, grad: &mut Tensor) {
    assert_eq!(activated.data.len(), grad.data.len());
    for (g, &a) in grad.data.iter_mut().zip(&activated.data) {
        if a <= 0.0 {
            *g *= LEAKY_SLOPE;
        }
    }
}

/// Mirror index into `[0, n)` without repeating the edge sample.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}
