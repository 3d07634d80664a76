//! Feature selection: mRMR (F-statistic relevance, correlation redundancy),
//! fuzzy-rough MRMS, and the rank-interleaved union of both.

mod fuzzy;
mod mrmr;

use std::collections::HashSet;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::{Error, Result};

pub use fuzzy::{fuzzy_dependency, mrms_select};
pub use mrmr::{f_statistic, mrmr_select, pearson_abs, F_SENTINEL, MIQ_EPSILON};

/// Scores within this relative distance of the step maximum count as tied;
/// the lowest column id among them wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MrmrObjective {
    /// Difference form: `V - W`.
    #[serde(rename = "MID", alias = "mid")]
    Mid,
    /// Quotient form: `V / (W + eps)`.
    #[serde(rename = "MIQ", alias = "miq")]
    Miq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    MrmrMid,
    MrmrMiq,
    Mrms,
}

/// Objective components recorded at one greedy step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepScore {
    Mrmr { v: f64, w: f64, score: f64 },
    Mrms { j_rel: f64, j_sig: f64, j: f64 },
}

impl StepScore {
    pub fn objective(&self) -> f64 {
        match *self {
            StepScore::Mrmr { score, .. } => score,
            StepScore::Mrms { j, .. } => j,
        }
    }
}

/// Ranked output of one selector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    pub k: usize,
    pub ranked_ids: Vec<usize>,
    pub step_scores: Vec<StepScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MrmrConfig {
    pub objective: MrmrObjective,
}

impl Default for MrmrConfig {
    fn default() -> Self {
        Self {
            objective: MrmrObjective::Mid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MrmsConfig {
    pub beta: f64,
}

impl Default for MrmsConfig {
    fn default() -> Self {
        Self { beta: 0.5 }
    }
}

/// Selector settings; `k` is optional because the recommender supplies its
/// own schedule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    pub mrmr: MrmrConfig,
    pub mrms: MrmsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

/// Picks the lowest id whose score lies within [`TIE_TOLERANCE`] of the max.
pub(crate) fn tied_argmax(scores: &[(usize, f64)]) -> Option<(usize, f64)> {
    let max = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return scores.iter().min_by_key(|s| s.0).copied();
    }
    let cutoff = max - TIE_TOLERANCE * max.abs().max(1.0);
    scores
        .iter()
        .filter(|s| s.1 >= cutoff)
        .min_by_key(|s| s.0)
        .copied()
}

fn triangle_index(a: usize, b: usize) -> usize {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    hi * (hi - 1) / 2 + lo
}

/// Per-matrix caches shared by both selectors.
///
/// F-statistics are filled eagerly in parallel. Pairwise |Pearson| values and
/// fuzzy dependencies are filled lazily through `OnceLock`s, so concurrent
/// fills are race-free and always store the same value.
pub struct RelevanceCache<'a> {
    matrix: &'a FeatureMatrix,
    labels: &'a [usize],
    f_stats: Vec<f64>,
    correlations: Vec<OnceLock<f64>>,
    columns: Vec<Vec<f64>>,
    fuzzy: OnceLock<fuzzy::FuzzyColumns>,
    dependency: Vec<OnceLock<f64>>,
    pair_dependency: Vec<OnceLock<f64>>,
}

impl<'a> RelevanceCache<'a> {
    pub fn new(matrix: &'a FeatureMatrix, labels: &'a [usize]) -> Result<Self> {
        if labels.len() != matrix.n_rows() {
            return Err(Error::Argument(format!(
                "{} labels for {} rows",
                labels.len(),
                matrix.n_rows()
            )));
        }
        mrmr::check_groups(labels)?;
        let n = matrix.n_cols();
        let columns: Vec<Vec<f64>> = (0..n).into_par_iter().map(|c| matrix.column(c)).collect();
        let f_stats = columns
            .par_iter()
            .map(|col| f_statistic(col, labels))
            .collect::<Result<Vec<_>>>()?;
        let pairs = n * n.saturating_sub(1) / 2;
        Ok(Self {
            matrix,
            labels,
            f_stats,
            correlations: (0..pairs).map(|_| OnceLock::new()).collect(),
            columns,
            fuzzy: OnceLock::new(),
            dependency: (0..n).map(|_| OnceLock::new()).collect(),
            pair_dependency: (0..pairs).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn labels(&self) -> &[usize] {
        self.labels
    }

    pub fn f_stat(&self, feature: usize) -> f64 {
        self.f_stats[feature]
    }

    pub fn f_stats(&self) -> &[f64] {
        &self.f_stats
    }

    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return if pearson_abs(&self.columns[a], &self.columns[a]) > 0.0 { 1.0 } else { 0.0 };
        }
        *self.correlations[triangle_index(a, b)]
            .get_or_init(|| pearson_abs(&self.columns[a], &self.columns[b]))
    }

    fn fuzzy_columns(&self) -> &fuzzy::FuzzyColumns {
        self.fuzzy
            .get_or_init(|| fuzzy::FuzzyColumns::new(&self.columns))
    }

    /// Fuzzy-rough dependency of the class on feature `f` alone.
    pub fn dependency(&self, f: usize) -> f64 {
        *self.dependency[f].get_or_init(|| self.fuzzy_columns().dependency(&[f], self.labels))
    }

    /// Dependency of the class on the pair `{a, b}`.
    pub fn pair_dependency(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.dependency(a);
        }
        *self.pair_dependency[triangle_index(a, b)]
            .get_or_init(|| self.fuzzy_columns().dependency(&[a, b], self.labels))
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Argument(format!(
            "k = {k} must be in 1..={n} (column count)"
        )));
    }
    Ok(())
}

/// Rank-interleaves `x` and `y` (x first), drops repeats, keeps `k`.
pub fn union_recommend(x: &SelectionResult, y: &SelectionResult, k: usize) -> Result<Vec<usize>> {
    if x.ranked_ids.len() != k || y.ranked_ids.len() != k {
        return Err(Error::Argument(format!(
            "union needs two rankings of size {k}, got {} and {}",
            x.ranked_ids.len(),
            y.ranked_ids.len()
        )));
    }
    let mut seen = HashSet::with_capacity(2 * k);
    let merged: Vec<usize> = x
        .ranked_ids
        .iter()
        .zip(&y.ranked_ids)
        .flat_map(|(a, b)| [*a, *b])
        .filter(|id| seen.insert(*id))
        .take(k)
        .collect();
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(ids: &[usize]) -> SelectionResult {
        SelectionResult {
            method: SelectionMethod::MrmrMid,
            k: ids.len(),
            ranked_ids: ids.to_vec(),
            step_scores: vec![StepScore::Mrmr { v: 0.0, w: 0.0, score: 0.0 }; ids.len()],
        }
    }

    #[test]
    fn union_rules() {
        let (a, b, c, d, e, f) = (0, 1, 2, 3, 4, 5);
        assert_eq!(union_recommend(&ranking(&[a, b, c]), &ranking(&[a, b, c]), 3).unwrap(), vec![a, b, c]);
        assert_eq!(union_recommend(&ranking(&[a, b, c]), &ranking(&[d, e, f]), 3).unwrap(), vec![a, d, b]);
        assert_eq!(union_recommend(&ranking(&[a, b, c]), &ranking(&[b, a, f]), 3).unwrap(), vec![a, b, c]);
        assert!(union_recommend(&ranking(&[a, b]), &ranking(&[a, b, c]), 3).is_err());
    }

    #[test]
    fn tie_rule_prefers_lower_id() {
        assert_eq!(tied_argmax(&[(3, 1.0), (1, 1.0 - 1e-14), (2, 0.5)]), Some((1, 1.0 - 1e-14)));
        assert_eq!(tied_argmax(&[(0, 0.2), (1, 0.3)]), Some((1, 0.3)));
    }

    #[test]
    fn config_json() {
        let c: SelectorConfig =
            serde_json::from_str(r#"{"mrmr":{"objective":"MIQ"},"mrms":{"beta":0.25},"k":7}"#).unwrap();
        assert_eq!(c.mrmr.objective, MrmrObjective::Miq);
        assert_eq!(c.mrms.beta, 0.25);
        assert_eq!(c.k, Some(7));
    }

    #[test]
    fn triangle_indexing_is_dense() {
        let mut seen = std::collections::BTreeSet::new();
        for a in 0..6 {
            for b in 0..a {
                assert!(seen.insert(triangle_index(a, b)));
                assert_eq!(triangle_index(a, b), triangle_index(b, a));
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), (0..15).collect::<Vec<_>>());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn union_has_k_unique_ids_from_inputs(
                x in Just((0..20usize).collect::<Vec<_>>()).prop_shuffle(),
                y in Just((0..20usize).collect::<Vec<_>>()).prop_shuffle(),
                k in 1usize..=8,
            ) {
                let (x, y) = (ranking(&x[..k]), ranking(&y[..k]));
                let z = union_recommend(&x, &y, k).unwrap();
                prop_assert_eq!(z.len(), k);
                let set: HashSet<_> = z.iter().collect();
                prop_assert_eq!(set.len(), k);
                prop_assert!(z.iter().all(|id| x.ranked_ids.contains(id) || y.ranked_ids.contains(id)));
                prop_assert_eq!(z[0], x.ranked_ids[0]);
                if x.ranked_ids[0] != y.ranked_ids[0] && k > 1 {
                    prop_assert!(z.contains(&y.ranked_ids[0]));
                }
            }
        }
    }
}
