use rayon::prelude::*;

use super::{check_k, tied_argmax, RelevanceCache, SelectionMethod, SelectionResult, StepScore};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Min-max normalized columns with their population standard deviations.
pub(super) struct FuzzyColumns {
    columns: Vec<Vec<f64>>,
    sigma: Vec<f64>,
}

impl FuzzyColumns {
    pub(super) fn new(raw: &[Vec<f64>]) -> Self {
        let columns: Vec<Vec<f64>> = raw.iter().map(|c| min_max(c)).collect();
        let sigma = columns.iter().map(|c| population_std(c)).collect();
        Self { columns, sigma }
    }

    fn similarity(&self, f: usize, i: usize, j: usize) -> f64 {
        let s = self.sigma[f];
        if s == 0.0 {
            return 1.0;
        }
        (1.0 - (self.columns[f][i] - self.columns[f][j]).abs() / s).max(0.0)
    }

    pub(super) fn dependency(&self, subset: &[usize], labels: &[usize]) -> f64 {
        let n = labels.len();
        if n == 0 || subset.is_empty() {
            return 0.0;
        }
        let total: f64 = (0..n)
            .map(|i| {
                let mut lower = 1.0f64;
                for j in 0..n {
                    if labels[j] == labels[i] {
                        continue;
                    }
                    let r = subset
                        .iter()
                        .map(|&f| self.similarity(f, i, j))
                        .fold(1.0f64, f64::min);
                    lower = lower.min(1.0 - r);
                    if lower <= 0.0 {
                        break;
                    }
                }
                lower
            })
            .sum();
        (total / n as f64).clamp(0.0, 1.0)
    }
}

fn min_max(col: &[f64]) -> Vec<f64> {
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; col.len()];
    }
    col.iter().map(|v| (v - lo) / span).collect()
}

fn population_std(col: &[f64]) -> f64 {
    if col.is_empty() {
        return 0.0;
    }
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Fuzzy-rough dependency degree of the class labels on a feature subset.
pub fn fuzzy_dependency(columns: &[&[f64]], labels: &[usize]) -> Result<f64> {
    if columns.is_empty() {
        return Err(Error::Argument("dependency needs a non-empty feature subset".into()));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != labels.len()) {
        return Err(Error::Argument(format!(
            "column of length {} for {} labels",
            c.len(),
            labels.len()
        )));
    }
    let owned: Vec<Vec<f64>> = columns.iter().map(|c| c.to_vec()).collect();
    let fc = FuzzyColumns::new(&owned);
    let subset: Vec<usize> = (0..owned.len()).collect();
    Ok(fc.dependency(&subset, labels))
}

/// Greedy forward MRMS: relevance plus `beta` times mean pairwise gain.
pub fn mrms_select(
    matrix: &FeatureMatrix,
    labels: &[usize],
    k: usize,
    beta: f64,
) -> Result<SelectionResult> {
    let cache = RelevanceCache::new(matrix, labels)?;
    mrms_with_cache(&cache, k, beta)
}

pub(crate) fn mrms_with_cache(
    cache: &RelevanceCache<'_>,
    k: usize,
    beta: f64,
) -> Result<SelectionResult> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Argument(format!("beta must be finite and >= 0, got {beta}")));
    }
    let n = cache.n_features();
    check_k(k, n)?;
    let relevance: Vec<f64> = (0..n).into_par_iter().map(|f| cache.dependency(f)).collect();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut in_set = vec![false; n];
    let mut gain_sum = vec![0.0; n];
    let mut steps = Vec::with_capacity(k);
    while selected.len() < k {
        let m = selected.len() as f64;
        let scored: Vec<(usize, f64)> = (0..n)
            .filter(|&f| !in_set[f])
            .map(|f| {
                let sig = if selected.is_empty() { 0.0 } else { gain_sum[f] / m };
                (f, relevance[f] + beta * sig)
            })
            .collect();
        let (best, j) = tied_argmax(&scored).expect("k <= n leaves a candidate");
        let j_sig = if selected.is_empty() { 0.0 } else { gain_sum[best] / m };
        steps.push(StepScore::Mrms {
            j_rel: relevance[best],
            j_sig,
            j,
        });
        selected.push(best);
        in_set[best] = true;
        if selected.len() < k {
            let base = relevance[best];
            let gains: Vec<(usize, f64)> = (0..n)
                .into_par_iter()
                .filter(|&f| !in_set[f])
                .map(|f| (f, cache.pair_dependency(f, best) - base))
                .collect();
            for (f, g) in gains {
                gain_sum[f] += g;
            }
        }
    }
    Ok(SelectionResult {
        method: SelectionMethod::Mrms,
        k,
        ranked_ids: selected,
        step_scores: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::mrmr::tests::random_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn label_feature_is_fully_dependent() {
        let labels = [0, 0, 0, 1, 1, 1];
        let col = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert_eq!(fuzzy_dependency(&[&col], &labels).unwrap(), 1.0);
        assert_eq!(fuzzy_dependency(&[&[3.0; 6]], &labels).unwrap(), 0.0);
    }

    /// Straight evaluation of the lower-approximation formula, no shortcuts.
    fn direct_gamma(cols: &[Vec<f64>], labels: &[usize]) -> f64 {
        let norm: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| {
                let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                c.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect()
            })
            .collect();
        let sig: Vec<f64> = norm
            .iter()
            .map(|c| {
                let m = c.iter().sum::<f64>() / c.len() as f64;
                (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c.len() as f64).sqrt()
            })
            .collect();
        let n = labels.len();
        let mut total = 0.0;
        for i in 0..n {
            let mut l = f64::INFINITY;
            for j in 0..n {
                let mut r = f64::INFINITY;
                for (c, s) in norm.iter().zip(&sig) {
                    let rf = if *s == 0.0 { 1.0 } else { f64::max(0.0, 1.0 - (c[i] - c[j]).abs() / s) };
                    r = r.min(rf);
                }
                let same = if labels[i] == labels[j] { 1.0 } else { 0.0 };
                l = l.min(f64::max(1.0 - r, same));
            }
            total += l;
        }
        total / n as f64
    }

    #[test]
    fn six_record_fixture() {
        let labels = [0, 0, 0, 1, 1, 1];
        let col = vec![0.0, 0.1, 0.2, 0.8, 0.9, 1.0];
        let got = fuzzy_dependency(&[&col], &labels).unwrap();
        let want = direct_gamma(&[col], &labels);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        // sigma = 0.4102; nearest cross pair 0.2 vs 0.8 is beyond sigma.
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_fixture_matches_direct_formula() {
        let labels = [0, 0, 0, 1, 1, 1];
        let a = vec![0.0, 0.3, 0.5, 0.4, 0.7, 1.0];
        let b = vec![1.0, 0.2, 0.6, 0.1, 0.9, 0.0];
        let one = fuzzy_dependency(&[&a], &labels).unwrap();
        let both = fuzzy_dependency(&[&a, &b], &labels).unwrap();
        assert!((one - direct_gamma(&[a.clone()], &labels)).abs() < 1e-12);
        assert!((both - direct_gamma(&[a, b], &labels)).abs() < 1e-12);
        assert!(one > 0.0 && one < 1.0);
        assert!(both >= one);
    }

    fn brute_force_mrms(m: &FeatureMatrix, labels: &[usize], k: usize, beta: f64) -> Vec<usize> {
        let cols: Vec<Vec<f64>> = (0..m.n_cols()).map(|c| m.column(c)).collect();
        let gamma = |ids: &[usize]| direct_gamma(&ids.iter().map(|&c| cols[c].clone()).collect::<Vec<_>>(), labels);
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..k {
            let mut scores = Vec::new();
            for f in 0..cols.len() {
                if chosen.contains(&f) {
                    continue;
                }
                let rel = gamma(&[f]);
                let sig = if chosen.is_empty() {
                    0.0
                } else {
                    chosen.iter().map(|&s| gamma(&[f, s]) - gamma(&[s])).sum::<f64>() / chosen.len() as f64
                };
                scores.push((f, rel + beta * sig));
            }
            let best = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * best.abs().max(1.0);
            chosen.push(scores.iter().filter(|s| s.1 >= best - tol).map(|s| s.0).min().unwrap());
        }
        chosen
    }

    #[test]
    fn greedy_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let (m, labels) = random_matrix(&mut rng, 24, 8);
            let got = mrms_select(&m, &labels, 3, 0.5).unwrap();
            assert_eq!(got.ranked_ids, brute_force_mrms(&m, &labels, 3, 0.5), "trial {trial}");
        }
    }

    #[test]
    fn duplicate_has_no_gain() {
        // Columns 0 and 1 are twins; column 2 separates the records the twins confuse.
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let a = [0.0, 0.1, 0.5, 0.55, 0.5, 0.55, 0.9, 1.0];
        let c = [0.3, 0.4, 0.0, 0.1, 0.9, 1.0, 0.6, 0.7];
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![a[i], a[i], c[i], 0.0]).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let cache = RelevanceCache::new(&m, &labels).unwrap();
        assert!((cache.pair_dependency(0, 1) - cache.dependency(0)).abs() < 1e-15);
        let got = mrms_select(&m, &labels, 2, 0.5).unwrap();
        let first = got.ranked_ids[0];
        let other = if first == 2 { 0 } else { 2 };
        assert_eq!(got.ranked_ids[1], other, "{:?}", got);
    }

    #[test]
    fn bad_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (m, labels) = random_matrix(&mut rng, 20, 4);
        assert!(mrms_select(&m, &labels, 2, -1.0).is_err());
        assert!(mrms_select(&m, &labels, 5, 0.5).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn oracle_equivalence(seed in any::<u64>(), n_cols in 2usize..=12, k in 1usize..=4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (m, labels) = random_matrix(&mut rng, 16, n_cols);
                let k = k.min(n_cols);
                let got = mrms_select(&m, &labels, k, 0.5).unwrap();
                prop_assert_eq!(got.ranked_ids, brute_force_mrms(&m, &labels, k, 0.5));
            }

            #[test]
            fn dependency_in_unit_interval(values in proptest::collection::vec(-100.0f64..100.0, 12)) {
                let labels: Vec<usize> = (0..12).map(|i| i % 3 % 2).collect();
                let g = fuzzy_dependency(&[&values], &labels).unwrap();
                prop_assert!((0.0..=1.0).contains(&g));
            }
        }
    }
}
