use std::collections::BTreeMap;

use super::{
    check_k, tied_argmax, MrmrObjective, RelevanceCache, SelectionMethod, SelectionResult,
    StepScore,
};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// F value reported when groups have zero spread but different means.
pub const F_SENTINEL: f64 = 1e12;
/// Guard added to the redundancy term of the quotient objective.
pub const MIQ_EPSILON: f64 = 1e-12;

pub(super) fn check_groups(labels: &[usize]) -> Result<()> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::Argument("relevance needs at least two classes".into()));
    }
    if let Some((class, n)) = counts.iter().find(|(_, n)| **n < 2) {
        return Err(Error::Argument(format!(
            "class {class} has {n} member(s); at least 2 are required"
        )));
    }
    Ok(())
}

/// One-way ANOVA F statistic of `column` grouped by `labels`.
pub fn f_statistic(column: &[f64], labels: &[usize]) -> Result<f64> {
    if column.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} values for {} labels",
            column.len(),
            labels.len()
        )));
    }
    check_groups(labels)?;
    let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (&v, &l) in column.iter().zip(labels) {
        let g = groups.entry(l).or_default();
        g.0 += v;
        g.1 += 1;
    }
    let n = column.len() as f64;
    let grand = column.iter().sum::<f64>() / n;
    let ssb: f64 = groups
        .values()
        .map(|&(s, c)| c as f64 * (s / c as f64 - grand).powi(2))
        .sum();
    let ssw: f64 = column
        .iter()
        .zip(labels)
        .map(|(v, l)| {
            let (s, c) = groups[l];
            (v - s / c as f64).powi(2)
        })
        .sum();
    let k = groups.len() as f64;
    // Sums of squares below this are round-off from identical values.
    let floor = 1e-24 * column.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if ssb <= floor {
        return Ok(0.0);
    }
    if ssw <= floor {
        return Ok(F_SENTINEL);
    }
    let f = (ssb / (k - 1.0)) / (ssw / (n - k));
    Ok(f.min(F_SENTINEL))
}

/// Absolute Pearson correlation; 0 when either column is constant.
pub fn pearson_abs(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale_a = 1e-24 * a[..n].iter().map(|v| v * v).sum::<f64>();
    let scale_b = 1e-24 * b[..n].iter().map(|v| v * v).sum::<f64>();
    if saa <= scale_a || sbb <= scale_b || saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).abs().min(1.0)
}

/// Greedy forward mRMR over all columns of `matrix`.
pub fn mrmr_select(
    matrix: &FeatureMatrix,
    labels: &[usize],
    k: usize,
    objective: MrmrObjective,
) -> Result<SelectionResult> {
    let cache = RelevanceCache::new(matrix, labels)?;
    mrmr_with_cache(&cache, k, objective)
}

pub(crate) fn mrmr_with_cache(
    cache: &RelevanceCache<'_>,
    k: usize,
    objective: MrmrObjective,
) -> Result<SelectionResult> {
    let n = cache.n_features();
    check_k(k, n)?;
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut in_set = vec![false; n];
    // Running sum of |r| against the selected set, per candidate.
    let mut redundancy_sum = vec![0.0; n];
    let mut steps = Vec::with_capacity(k);
    while selected.len() < k {
        let m = selected.len() as f64;
        let scored: Vec<(usize, f64)> = (0..n)
            .filter(|&f| !in_set[f])
            .map(|f| {
                let v = cache.f_stat(f);
                let score = if selected.is_empty() {
                    v
                } else {
                    let w = redundancy_sum[f] / m;
                    match objective {
                        MrmrObjective::Mid => v - w,
                        MrmrObjective::Miq => v / (w + MIQ_EPSILON),
                    }
                };
                (f, score)
            })
            .collect();
        let (best, score) = tied_argmax(&scored).expect("k <= n leaves a candidate");
        let v = cache.f_stat(best);
        let w = if selected.is_empty() { 0.0 } else { redundancy_sum[best] / m };
        steps.push(StepScore::Mrmr { v, w, score });
        selected.push(best);
        in_set[best] = true;
        if selected.len() < k {
            for (f, sum) in redundancy_sum.iter_mut().enumerate() {
                if !in_set[f] {
                    *sum += cache.correlation(f, best);
                }
            }
        }
    }
    Ok(SelectionResult {
        method: match objective {
            MrmrObjective::Mid => SelectionMethod::MrmrMid,
            MrmrObjective::Miq => SelectionMethod::MrmrMiq,
        },
        k,
        ranked_ids: selected,
        step_scores: steps,
    })
}
