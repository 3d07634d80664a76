use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::svm::Standardizer;
use crate::{Error, Result};

/// Principal axes of standardized training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub standardizer: Standardizer,
    /// One unit-length loading vector per component, strongest first.
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Variance captured per component (population normalisation).
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], n_components: usize) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if n_components == 0 || n_components > n.min(d) {
            return Err(Error::Argument(format!(
                "n_components = {n_components} must be in 1..={} (min of rows and columns)",
                n.min(d)
            )));
        }
        let standardizer = Standardizer::fit(rows)?;
        let z = standardizer.transform(rows);
        let m = DMatrix::from_fn(n, d, |r, c| z[r][c]);
        let svd = m.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Run("SVD did not return right singular vectors".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
        let total_var: f64 = svd.singular_values.iter().map(|s| s * s / n as f64).sum();
        let mut components = Vec::with_capacity(n_components);
        let mut singular_values = Vec::with_capacity(n_components);
        for &k in order.iter().take(n_components) {
            let mut axis: Vec<f64> = v_t.row(k).iter().copied().collect();
            let pivot = axis
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(_, v)| v)
                .unwrap_or(0.0);
            if pivot < 0.0 {
                axis.iter_mut().for_each(|v| *v = -*v);
            }
            components.push(axis);
            singular_values.push(svd.singular_values[k]);
        }
        let explained_variance: Vec<f64> = singular_values.iter().map(|s| s * s / n as f64).collect();
        let explained_variance_ratio = explained_variance
            .iter()
            .map(|v| if total_var > 0.0 { v / total_var } else { 0.0 })
            .collect();
        Ok(Self {
            standardizer,
            components,
            singular_values,
            explained_variance,
            explained_variance_ratio,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn project_row(&self, row: &[f64]) -> Vec<f64> {
        let z = self.standardizer.transform_row(row);
        self.components
            .iter()
            .map(|axis| axis.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn project(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.project_row(r)).collect()
    }

    /// Maps scores back to standardized feature space.
    pub fn back_project(&self, scores: &[f64]) -> Vec<f64> {
        let d = self.standardizer.width();
        let mut out = vec![0.0; d];
        for (axis, s) in self.components.iter().zip(scores) {
            for (o, a) in out.iter_mut().zip(axis) {
                *o += a * s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let base: f64 = rng.random_range(-1.0..1.0);
                (0..d).map(|c| base * c as f64 + rng.random_range(-1.0..1.0)).collect()
            })
            .collect()
    }

    /// Cyclic Jacobi eigenvalues of a symmetric matrix.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-22 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn explained_variance_matches_gram_eigenvalues() {
        let rows = random_rows(4, 30, 5);
        let pca = Pca::fit(&rows, 5).unwrap();
        let z = pca.standardizer.transform(&rows);
        let gram: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| z.iter().map(|r| r[i] * r[j]).sum::<f64>()).collect())
            .collect();
        let eig = jacobi_eigenvalues(gram);
        for (got, want) in pca.explained_variance.iter().zip(&eig) {
            assert!((got - want / 30.0).abs() < 1e-9, "{got} vs {}", want / 30.0);
        }
        assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        let ratio_sum: f64 = pca.explained_variance_ratio.iter().sum();
        assert!((ratio_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_rank_round_trip() {
        let rows = random_rows(9, 20, 4);
        let pca = Pca::fit(&rows, 4).unwrap();
        for row in &rows {
            let back = pca.back_project(&pca.project_row(row));
            let z = pca.standardizer.transform_row(row);
            for (a, b) in back.iter().zip(&z) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn components_are_orthonormal_with_fixed_sign() {
        let rows = random_rows(2, 25, 6);
        let pca = Pca::fit(&rows, 4).unwrap();
        for (i, a) in pca.components.iter().enumerate() {
            for (j, b) in pca.components.iter().enumerate() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-8);
            }
            let pivot = a.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap();
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn too_many_components() {
        let rows = random_rows(1, 3, 5);
        assert!(Pca::fit(&rows, 4).is_err());
        assert!(Pca::fit(&rows, 0).is_err());
        assert!(Pca::fit(&rows, 3).is_ok());
    }
}
