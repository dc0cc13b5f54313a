use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - half;
        *t = (-x * x / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian filtering over every fully contained window position.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * src[y * w + x + k])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean structural similarity over all 11×11 Gaussian windows that fit inside the image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b)?;
    a.ensure_single_channel("ssim")?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let taps = gaussian_taps();
    let xa: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let xb: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(u, v)| u * v).collect() };
    let mu_a = filter_valid(&xa, h, w, &taps);
    let mu_b = filter_valid(&xb, h, w, &taps);
    let e_aa = filter_valid(&prod(&xa, &xa), h, w, &taps);
    let e_bb = filter_valid(&prod(&xb, &xb), h, w, &taps);
    let e_ab = filter_valid(&prod(&xa, &xb), h, w, &taps);
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, h: usize, w: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, |_, _| rng.random())
    }

    #[test]
    fn identical_is_one() {
        let a = random(1, 32, 40);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn symmetric() {
        for seed in 0..5 {
            let a = random(seed, 20, 20);
            let b = random(seed + 100, 20, 20);
            assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        }
    }

    #[test]
    fn noise_against_flat_gray_is_dissimilar() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = rand_distr::Normal::new(0.5f32, 1.0).unwrap();
        let noise = Image::from_fn(64, 64, |_, _| rng.sample(normal));
        let gray = Image::from_fn(64, 64, |_, _| 0.5);
        assert!(ssim(&noise, &gray).unwrap() < 0.1);
    }

    #[test]
    fn window_weights_sum_to_one() {
        let taps = gaussian_taps();
        assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((taps[4] / taps[5] - (-1.0f64 / 4.5).exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_lowers_luminance_term_only() {
        // for a constant pair the structure terms are c2/c2; only luminance remains
        let a = Image::from_fn(11, 11, |_, _| 0.2);
        let b = Image::from_fn(11, 11, |_, _| 0.6);
        let c1 = K1 * K1;
        let (ma, mb) = (0.2f32 as f64, 0.6f32 as f64);
        let expected = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn too_small_rejected() {
        let a = Image::zeros(10, 30, 1);
        assert!(ssim(&a, &a).is_err());
    }
}
