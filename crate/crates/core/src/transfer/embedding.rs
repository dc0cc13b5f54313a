use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of retained components.
pub const EMBEDDING_DIMS: usize = 8;

/// Principal-component projection fitted on calibration fingerprints.
///
/// Components are orthonormal, ordered by decreasing variance, and signed so that each
/// component's largest-magnitude coefficient is positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

impl EmbeddingModel {
    /// Fits on equally long vectors; keeps at most [`EMBEDDING_DIMS`] non-degenerate components.
    pub fn fit(samples: &[&[f32]]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "embedding needs at least 2 calibration entries, got {}",
                samples.len()
            )));
        }
        let dim = samples[0].len();
        if samples.iter().any(|s| s.len() != dim) || dim == 0 {
            return Err(Error::DimensionMismatch(
                "fingerprints differ in length".into(),
            ));
        }
        let n = samples.len();
        let mut mean = vec![0.0f64; dim];
        for s in samples {
            for (m, &v) in mean.iter_mut().zip(s.iter()) {
                *m += v as f64 / n as f64;
            }
        }
        let centered = DMatrix::from_fn(n, dim, |i, j| samples[i][j] as f64 - mean[j]);
        let gram = &centered * centered.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let largest = eig.eigenvalues[order[0]].max(0.0);
        let mut components = Vec::new();
        for &i in order.iter().take(EMBEDDING_DIMS) {
            let lambda = eig.eigenvalues[i];
            if largest == 0.0 || lambda <= largest * 1e-10 {
                break;
            }
            let u = eig.eigenvectors.column(i);
            let mut comp: Vec<f64> = (centered.transpose() * u)
                .iter()
                .map(|v| v / lambda.sqrt())
                .collect();
            let norm = comp.iter().map(|v| v * v).sum::<f64>().sqrt();
            comp.iter_mut().for_each(|v| *v /= norm);
            let pivot =
                comp.iter().enumerate().fold(
                    0,
                    |best, (j, v)| if v.abs() > comp[best].abs() { j } else { best },
                );
            if comp[pivot] < 0.0 {
                comp.iter_mut().for_each(|v| *v = -*v);
            }
            components.push(comp);
        }
        Ok(Self { mean, components })
    }

    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn input_len(&self) -> usize {
        self.mean.len()
    }

    pub fn embed(&self, sample: &[f32]) -> Result<Vec<f64>> {
        if sample.len() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "embedding expects {} values, got {}",
                self.mean.len(),
                sample.len()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(sample)
                    .zip(&self.mean)
                    .map(|((w, &x), m)| w * (x as f64 - m))
                    .sum()
            })
            .collect())
    }

    /// Point in input space whose embedding is `coords`.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &a) in self.components.iter().zip(coords) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += a * w;
            }
        }
        out
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random()).collect())
            .collect()
    }

    fn refs(v: &[Vec<f32>]) -> Vec<&[f32]> {
        v.iter().map(|s| s.as_slice()).collect()
    }

    #[test]
    fn components_orthonormal_and_sorted() {
        let data = samples(12, 30, 1);
        let model = EmbeddingModel::fit(&refs(&data)).unwrap();
        assert_eq!(model.dims(), EMBEDDING_DIMS);
        for (i, a) in model.components.iter().enumerate() {
            for (j, b) in model.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-9);
            }
            let pivot = a
                .iter()
                .cloned()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
        let variances: Vec<f64> = model
            .components
            .iter()
            .enumerate()
            .map(|(k, _)| {
                data.iter()
                    .map(|s| model.embed(s).unwrap()[k].powi(2))
                    .sum()
            })
            .collect();
        assert!(variances.windows(2).all(|w| w[0] >= w[1] - 1e-9));
    }

    #[test]
    fn projection_is_idempotent() {
        let data = samples(5, 20, 2);
        let model = EmbeddingModel::fit(&refs(&data)).unwrap();
        assert_eq!(model.dims(), 4);
        let v = model.embed(&data[0]).unwrap();
        let back: Vec<f32> = model.reconstruct(&v).iter().map(|&x| x as f32).collect();
        let again = model.embed(&back).unwrap();
        for (a, b) in v.iter().zip(&again) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn matches_covariance_eigenvectors() {
        // principal direction of points spread along (1, 1) is ±(1, 1)/√2
        let data: Vec<Vec<f32>> = (0..6)
            .map(|i| vec![i as f32, i as f32 + 0.01 * (i % 2) as f32])
            .collect();
        let model = EmbeddingModel::fit(&refs(&data)).unwrap();
        let c = &model.components[0];
        assert!((c[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-2);
        assert!((c[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-2);
    }

    #[test]
    fn degenerate_inputs() {
        let one = samples(1, 4, 3);
        assert!(EmbeddingModel::fit(&refs(&one)).is_err());
        let same = vec![vec![0.5f32; 4]; 3];
        let model = EmbeddingModel::fit(&refs(&same)).unwrap();
        assert_eq!(model.dims(), 0);
        assert!(model.embed(&[0.0; 3]).is_err());
    }
}
