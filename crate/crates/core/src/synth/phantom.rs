use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const MIN_PHANTOM_SIZE: usize = 32;
const BACKGROUND: f32 = 0.1;
const PEAK: f32 = 0.9;

/// Family of synthetic fluorescence-like structures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// Gaussian spots at random positions.
    Dots,
    /// Thin random-walk curves.
    Filaments,
    /// Thresholded smooth noise.
    Blobs,
    /// All of the above superimposed.
    Mixed,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 4] = [
        PhantomKind::Dots,
        PhantomKind::Filaments,
        PhantomKind::Blobs,
        PhantomKind::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhantomKind::Dots => "dots",
            PhantomKind::Filaments => "filaments",
            PhantomKind::Blobs => "blobs",
            PhantomKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhantomKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown phantom kind `{s}`")))
    }
}

/// Foreground intensity map in [0, 1], combined later with the background level.
struct Canvas {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Canvas {
    fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    /// Max-blends an isotropic Gaussian spot.
    fn splat(&mut self, cy: f32, cx: f32, sigma: f32, amplitude: f32) {
        let radius = (3.0 * sigma).ceil() as isize;
        let (y0, x0) = (cy.round() as isize, cx.round() as isize);
        for y in (y0 - radius).max(0)..=(y0 + radius).min(self.height as isize - 1) {
            for x in (x0 - radius).max(0)..=(x0 + radius).min(self.width as isize - 1) {
                let d2 = (y as f32 - cy).powi(2) + (x as f32 - cx).powi(2);
                let v = amplitude * (-d2 / (2.0 * sigma * sigma)).exp();
                let cell = &mut self.data[y as usize * self.width + x as usize];
                *cell = cell.max(v);
            }
        }
    }

    fn into_image(self) -> Image {
        let data = self
            .data
            .into_iter()
            .map(|v| BACKGROUND + (PEAK - BACKGROUND) * v.clamp(0.0, 1.0))
            .collect();
        Image::new(self.height, self.width, 1, data).expect("finite phantom")
    }
}

fn dots(rng: &mut ChaCha8Rng, canvas: &mut Canvas) {
    let count = (canvas.height * canvas.width / 120).max(4);
    for _ in 0..count {
        let cy = rng.random_range(0.0..canvas.height as f32);
        let cx = rng.random_range(0.0..canvas.width as f32);
        let sigma = rng.random_range(1.2..2.2);
        let amp = rng.random_range(0.5..1.0);
        canvas.splat(cy, cx, sigma, amp);
    }
}

fn filaments(rng: &mut ChaCha8Rng, canvas: &mut Canvas) {
    let (h, w) = (canvas.height as f32, canvas.width as f32);
    let count = ((h * w) / 700.0).ceil().max(2.0) as usize;
    for _ in 0..count {
        let (mut y, mut x) = (rng.random_range(0.0..h), rng.random_range(0.0..w));
        let mut heading = rng.random_range(0.0..std::f32::consts::TAU);
        let amp = rng.random_range(0.6..1.0);
        let sigma = rng.random_range(0.6..0.9);
        let steps = (1.5 * h.max(w)) as usize * 2;
        for _ in 0..steps {
            canvas.splat(y, x, sigma, amp);
            heading += rng.random_range(-0.25..0.25);
            y += 0.5 * heading.sin();
            x += 0.5 * heading.cos();
            if y < -2.0 || x < -2.0 || y > h + 2.0 || x > w + 2.0 {
                break;
            }
        }
    }
}

/// Separable Gaussian blur with clamped borders.
fn blur(data: &[f32], h: usize, w: usize, sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f32> = (-radius..=radius)
        .map(|k| (-(k * k) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f32 = taps.iter().sum();
    let pass = |src: &[f32], along_rows: bool| -> Vec<f32> {
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, k) in taps.iter().zip(-radius..=radius) {
                    let (yy, xx) = if along_rows {
                        (y, (x as isize + k).clamp(0, w as isize - 1) as usize)
                    } else {
                        ((y as isize + k).clamp(0, h as isize - 1) as usize, x)
                    };
                    acc += t * src[yy * w + xx];
                }
                out[y * w + x] = acc / norm;
            }
        }
        out
    };
    pass(&pass(data, true), false)
}

fn blobs(rng: &mut ChaCha8Rng, canvas: &mut Canvas) {
    let (h, w) = (canvas.height, canvas.width);
    let noise: Vec<f32> = (0..h * w).map(|_| rng.random()).collect();
    let smooth = blur(&noise, h, w, 3.0);
    let (lo, hi) = smooth
        .iter()
        .fold((f32::MAX, f32::MIN), |(l, u), &v| (l.min(v), u.max(v)));
    let span = (hi - lo).max(1e-6);
    let mask: Vec<f32> = smooth
        .iter()
        .map(|&v| {
            let t = ((v - lo) / span - 0.55) / 0.08;
            t.clamp(0.0, 1.0)
        })
        .collect();
    let soft = blur(&mask, h, w, 0.8);
    for (c, v) in canvas.data.iter_mut().zip(soft) {
        *c = c.max(0.8 * v);
    }
}

/// Deterministic clean phantom with values in [0.1, 0.9].
pub fn generate_phantom(
    kind: PhantomKind,
    seed: u64,
    height: usize,
    width: usize,
) -> Result<Image> {
    if height < MIN_PHANTOM_SIZE || width < MIN_PHANTOM_SIZE {
        return Err(Error::TooSmall(format!(
            "phantoms need at least {MIN_PHANTOM_SIZE}x{MIN_PHANTOM_SIZE}, got {height}x{width}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut canvas = Canvas::new(height, width);
    match kind {
        PhantomKind::Dots => dots(&mut rng, &mut canvas),
        PhantomKind::Filaments => filaments(&mut rng, &mut canvas),
        PhantomKind::Blobs => blobs(&mut rng, &mut canvas),
        PhantomKind::Mixed => {
            blobs(&mut rng, &mut canvas);
            canvas.data.iter_mut().for_each(|v| *v *= 0.6);
            filaments(&mut rng, &mut canvas);
            dots(&mut rng, &mut canvas);
        }
    }
    Ok(canvas.into_image())
}
