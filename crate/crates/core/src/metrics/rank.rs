use std::cmp::Ordering;

use crate::error::{Error, Result};

/// 1-based ranks where `better(a, b)` orders the best value first; ties share the mean position.
pub fn fractional_ranks(values: &[f64], better: impl Fn(f64, f64) -> Ordering) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| better(values[i], values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && better(values[order[start]], values[order[end]]) == Ordering::Equal
        {
            end += 1;
        }
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

fn higher_first(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

fn lower_first(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// PSNR rank plus perceptual rank for every candidate.
pub fn rank_sums(candidates: &[(f64, f64)]) -> Vec<f64> {
    let psnr: Vec<f64> = candidates.iter().map(|c| c.0).collect();
    let perceptual: Vec<f64> = candidates.iter().map(|c| c.1).collect();
    let rp = fractional_ranks(&psnr, higher_first);
    let rq = fractional_ranks(&perceptual, lower_first);
    rp.iter().zip(&rq).map(|(a, b)| a + b).collect()
}

/// Index of the `(psnr, perceptual)` candidate with the lowest rank sum.
///
/// Ties go to the higher PSNR, then the lower index. Infinite PSNR outranks every finite value.
pub fn rank_sum_select(candidates: &[(f64, f64)]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty(
            "rank_sum_select needs at least one candidate".into(),
        ));
    }
    if candidates.iter().any(|c| c.0.is_nan() || c.1.is_nan()) {
        return Err(Error::InvalidArgument(
            "NaN in rank_sum_select candidates".into(),
        ));
    }
    let sums = rank_sums(candidates);
    let best = (0..candidates.len())
        .min_by(|&i, &j| {
            sums[i]
                .total_cmp(&sums[j])
                .then(candidates[j].0.total_cmp(&candidates[i].0))
                .then(i.cmp(&j))
        })
        .expect("non-empty");
    Ok(best)
}
