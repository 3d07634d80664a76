use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fold_scores;
use crate::dataset::FoldRoles;
use crate::eval::{evaluate_on_roles, EvalConfig, FoldOutcome, Metric};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Upper bound on the refinement cap; 2^20 - 1 subsets.
pub const MAX_REFINE_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub feature_ids: Vec<usize>,
    pub per_fold: Vec<f64>,
    pub min: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub base: Vec<usize>,
    pub cap: usize,
    /// Why enumeration did not run, when it did not.
    pub skipped: Option<String>,
    pub evaluations: Vec<SubsetScore>,
    pub best: Vec<usize>,
    pub best_min: Option<f64>,
    pub best_mean: Option<f64>,
}

impl Refinement {
    pub fn evaluation_count(&self) -> usize {
        self.evaluations.len()
    }
}

fn summary(outcomes: &[FoldOutcome], metric: Metric) -> (Vec<f64>, f64, f64) {
    let per_fold = fold_scores(outcomes, metric);
    let min = per_fold.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = per_fold.iter().sum::<f64>() / per_fold.len().max(1) as f64;
    (per_fold, min, mean)
}

/// Higher min, then higher mean, then fewer features, then lower ids.
fn rank(a: &SubsetScore, b: &SubsetScore) -> Ordering {
    b.min
        .total_cmp(&a.min)
        .then(b.mean.total_cmp(&a.mean))
        .then(a.feature_ids.len().cmp(&b.feature_ids.len()))
        .then_with(|| {
            let mut x = a.feature_ids.clone();
            let mut y = b.feature_ids.clone();
            x.sort_unstable();
            y.sort_unstable();
            x.cmp(&y)
        })
}

/// Scores every non-empty subset of `base` on eval rows and keeps the best.
///
/// When `base` is larger than `cap` nothing is enumerated; the result keeps
/// `base` and records why.
pub fn exhaustive_refine(
    matrix: &FeatureMatrix,
    labels: &[usize],
    roles: &[FoldRoles],
    base: &[usize],
    cap: usize,
    config: &EvalConfig,
    metric: Metric,
) -> Result<Refinement> {
    if cap > MAX_REFINE_CAP {
        return Err(Error::Config(format!(
            "refinement cap {cap} exceeds {MAX_REFINE_CAP}"
        )));
    }
    if base.is_empty() {
        return Err(Error::Argument("refinement base set is empty".into()));
    }
    if base.len() > cap {
        return Ok(Refinement {
            base: base.to_vec(),
            cap,
            skipped: Some(format!(
                "base set has {} features, above the cap of {cap}",
                base.len()
            )),
            evaluations: Vec::new(),
            best: base.to_vec(),
            best_min: None,
            best_mean: None,
        });
    }
    let subsets: Vec<Vec<usize>> = (1u32..(1u32 << base.len()))
        .map(|mask| {
            base.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &id)| id)
                .collect()
        })
        .collect();
    let evaluations = subsets
        .par_iter()
        .map(|ids| {
            let outcomes = evaluate_on_roles(matrix, labels, ids, roles, config, false)?;
            let (per_fold, min, mean) = summary(&outcomes, metric);
            Ok(SubsetScore {
                feature_ids: ids.clone(),
                per_fold,
                min,
                mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = evaluations
        .iter()
        .min_by(|a, b| rank(a, b))
        .expect("at least one subset")
        .clone();
    Ok(Refinement {
        base: base.to_vec(),
        cap,
        skipped: None,
        evaluations,
        best: best.feature_ids,
        best_min: Some(best.min),
        best_mean: Some(best.mean),
    })
}
