use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::grid::{GridResult, ImageGrid};
use crate::dip::{parameter_count, DipConfig, NetworkSpec};
use crate::error::{Error, Result};
use crate::metrics::{rank_sum_select, rank_sums, MetricKind, MetricReport};

/// How group members' grids are combined into one group optimum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupObjective {
    /// Lowest mean per-image PSNR/perceptual rank sum.
    #[default]
    MeanRankSum,
    /// Highest mean PSNR.
    MeanPsnr,
}

/// Results sorted by configuration so selection does not depend on input order.
fn canonical(results: &[GridResult]) -> Vec<&GridResult> {
    let mut sorted: Vec<&GridResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.config());
    sorted
}

/// Smaller is better. PSNR is compared through MSE, which it is a strictly decreasing function of.
fn selection_key(kind: MetricKind, report: &MetricReport) -> f64 {
    match kind {
        MetricKind::Psnr => report.mse,
        _ => kind.loss_value(report.get(kind)),
    }
}

/// The best configuration for each measure; ties go to fewer iterations, then fewer parameters.
pub fn best_per_measure(results: &[GridResult]) -> Result<BTreeMap<MetricKind, DipConfig>> {
    if results.is_empty() {
        return Err(Error::Empty("best_per_measure needs results".into()));
    }
    let mut counts: HashMap<NetworkSpec, usize> = HashMap::new();
    for r in results {
        if let Entry::Vacant(e) = counts.entry(r.spec) {
            e.insert(parameter_count(&r.spec)?);
        }
    }
    let sorted = canonical(results);
    let mut out = BTreeMap::new();
    for kind in MetricKind::ALL {
        let best = sorted
            .iter()
            .min_by(|a, b| {
                selection_key(kind, &a.metrics)
                    .total_cmp(&selection_key(kind, &b.metrics))
                    .then(a.iteration.cmp(&b.iteration))
                    .then(counts[&a.spec].cmp(&counts[&b.spec]))
            })
            .expect("non-empty");
        out.insert(kind, best.config());
    }
    Ok(out)
}

/// The configuration with the lowest PSNR/perceptual rank sum.
pub fn best_combined(results: &[GridResult]) -> Result<DipConfig> {
    let sorted = canonical(results);
    let pairs: Vec<(f64, f64)> = sorted
        .iter()
        .map(|r| (r.metrics.psnr, r.metrics.perceptual))
        .collect();
    Ok(sorted[rank_sum_select(&pairs)?].config())
}

/// PSNR/perceptual rank sum of every configuration, ranked within this result set.
pub fn image_rank_sums(results: &[GridResult]) -> BTreeMap<DipConfig, f64> {
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.metrics.psnr, r.metrics.perceptual))
        .collect();
    results
        .iter()
        .map(GridResult::config)
        .zip(rank_sums(&pairs))
        .collect()
}

/// Group optimum over member grids.
///
/// Members must share one search grid. Configurations that diverged on any member are
/// not eligible; per-image ranks are still computed over each member's full result set.
/// Ties go to the higher mean PSNR, then fewer iterations.
pub fn group_best(members: &[&ImageGrid], objective: GroupObjective) -> Result<DipConfig> {
    let first = members
        .first()
        .ok_or_else(|| Error::Empty("group_best needs at least one member".into()))?;
    if let Some(odd) = members.iter().find(|m| !m.same_grid(first)) {
        return Err(Error::GridMismatch(format!(
            "`{}` and `{}` were searched over different grids",
            first.image_id, odd.image_id
        )));
    }
    let mut eligible: BTreeSet<DipConfig> = first.results.iter().map(GridResult::config).collect();
    for m in &members[1..] {
        let own: BTreeSet<DipConfig> = m.results.iter().map(GridResult::config).collect();
        eligible.retain(|c| own.contains(c));
    }
    if eligible.is_empty() {
        return Err(Error::Empty(
            "no configuration succeeded on every group member".into(),
        ));
    }
    let n = members.len() as f64;
    let mut mean_psnr: BTreeMap<DipConfig, f64> = eligible.iter().map(|c| (*c, 0.0)).collect();
    let mut mean_rank: BTreeMap<DipConfig, f64> = mean_psnr.clone();
    for m in members {
        let ranks = image_rank_sums(&m.results);
        for r in &m.results {
            let c = r.config();
            if let Some(p) = mean_psnr.get_mut(&c) {
                *p += r.metrics.psnr / n;
                *mean_rank.get_mut(&c).expect("same keys") += ranks[&c] / n;
            }
        }
    }
    let best = eligible
        .iter()
        .min_by(|a, b| {
            let primary = match objective {
                GroupObjective::MeanRankSum => mean_rank[a].total_cmp(&mean_rank[b]),
                GroupObjective::MeanPsnr => mean_psnr[b].total_cmp(&mean_psnr[a]),
            };
            primary
                .then(mean_psnr[b].total_cmp(&mean_psnr[a]))
                .then(a.iteration.cmp(&b.iteration))
        })
        .expect("non-empty");
    Ok(*best)
}
