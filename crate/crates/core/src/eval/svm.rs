//! Soft-margin binary SVM trained with an SMO solver (second-order working
//! set selection, per-sample box bounds).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Curvature floor for non positive-definite kernel pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Poly { gamma: f64, degree: u32, coef0: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Poly { gamma, degree, coef0 } => (gamma * dot(a, b) + coef0).powi(degree as i32),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf { .. } => "rbf",
            Kernel::Poly { .. } => "poly",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeightMode {
    /// `n / (2 * n_class)` per class.
    #[default]
    Balanced,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub class_weight: ClassWeightMode,
    /// Label treated as the +1 side.
    pub positive_class: usize,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl SvmParams {
    pub fn new(kernel: Kernel, c: f64) -> Self {
        Self {
            kernel,
            c,
            class_weight: ClassWeightMode::Balanced,
            positive_class: 1,
            tolerance: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

/// Per-column centring and scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with no spread on the training rows; always mapped to 0.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Argument("ragged rows".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        let mut std = vec![1.0; width];
        let mut constant = vec![false; width];
        for c in 0..width {
            let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
            mean[c] = m;
            let s = var.sqrt();
            if s > 1e-12 * m.abs().max(1e-300) && s > 0.0 {
                std[c] = s;
            } else {
                constant[c] = true;
            }
        }
        Ok(Self { mean, std, constant })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| if self.constant[c] { 0.0 } else { (v - self.mean[c]) / self.std[c] })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    /// Standardized coordinates.
    pub x: Vec<f64>,
    pub alpha: f64,
    /// +1 or -1.
    pub y: f64,
    /// Box bound `w_class * C` the solver used for this sample.
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub positive_class: usize,
    pub negative_class: usize,
    /// Weight for the positive and negative class, in that order.
    pub class_weights: [f64; 2],
    pub support: Vec<SupportVector>,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.standardizer.width()
    }

    /// Decision value on an already standardized row.
    pub fn decision_standardized(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|sv| sv.alpha * sv.y * self.kernel.eval(&sv.x, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.decision_standardized(&self.standardizer.transform_row(row))
    }

    pub fn dual_sum(&self) -> f64 {
        self.support.iter().map(|sv| sv.alpha * sv.y).sum()
    }
}

/// Trains a binary SVM on raw `rows`; labels must hold exactly two classes,
/// one of which is `params.positive_class`.
pub fn svm_train(rows: &[Vec<f64>], labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    if rows.len() != labels.len() {
        return Err(Error::Argument(format!("{} rows for {} labels", rows.len(), labels.len())));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Argument(format!("C must be positive, got {}", params.c)));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Argument("training rows contain non-finite values".into()));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 || !classes.contains(&params.positive_class) {
        return Err(Error::Training(format!(
            "training rows must contain the positive class and one other class, found {classes:?}"
        )));
    }
    let negative_class = *classes.iter().find(|&&c| c != params.positive_class).unwrap();
    let standardizer = Standardizer::fit(rows)?;
    let x = standardizer.transform(rows);
    let n = x.len();
    let y: Vec<f64> = labels
        .iter()
        .map(|&l| if l == params.positive_class { 1.0 } else { -1.0 })
        .collect();
    let n_pos = y.iter().filter(|&&v| v > 0.0).count();
    let class_weights = match params.class_weight {
        ClassWeightMode::Balanced => [
            n as f64 / (2.0 * n_pos as f64),
            n as f64 / (2.0 * (n - n_pos) as f64),
        ],
        ClassWeightMode::Uniform => [1.0, 1.0],
    };
    let upper: Vec<f64> = y
        .iter()
        .map(|&v| params.c * if v > 0.0 { class_weights[0] } else { class_weights[1] })
        .collect();

    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| params.kernel.eval(&x[i], &x[j])).collect())
        .collect();
    let solution = smo(&k, &y, &upper, params.tolerance, params.max_iter);
    if !solution.converged {
        log::warn!("SMO stopped at the iteration cap ({}) before reaching tolerance", params.max_iter);
    }
    let support = (0..n)
        .filter(|&i| solution.alpha[i] > 0.0)
        .map(|i| SupportVector {
            x: x[i].clone(),
            alpha: solution.alpha[i],
            y: y[i],
            upper: upper[i],
        })
        .collect();
    Ok(SvmModel {
        kernel: params.kernel,
        c: params.c,
        positive_class: params.positive_class,
        negative_class,
        class_weights,
        support,
        bias: -solution.rho,
        standardizer,
        iterations: solution.iterations,
        converged: solution.converged,
    })
}

/// Predicted class label per row.
pub fn svm_predict(model: &SvmModel, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
    if let Some(r) = rows.iter().find(|r| r.len() != model.n_features()) {
        return Err(Error::Argument(format!(
            "row width {} does not match model width {}",
            r.len(),
            model.n_features()
        )));
    }
    Ok(rows
        .iter()
        .map(|r| {
            if model.decision(r) > 0.0 {
                model.positive_class
            } else {
                model.negative_class
            }
        })
        .collect())
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

/// Minimizes `0.5 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a_i <= upper_i`, with
/// `Q_ij = y_i y_j K_ij`.
fn smo(k: &[Vec<f64>], y: &[f64], upper: &[f64], eps: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let at_upper = |a: f64, i: usize| a >= upper[i];
    let at_lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // First index: maximal violating candidate from the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] > 0.0 { !at_upper(alpha[t], t) } else { !at_lower(alpha[t]) };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        // Second index: largest objective decrease from the "low" set.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t], t) };
            if !low {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let grad_diff = gmax + yg;
            if grad_diff > 0.0 {
                let quad = k[i][i] + k[t][t] - 2.0 * k[i][t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < eps {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;

        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k[i][j];
        if y[i] != y[j] {
            let quad = (k[i][i] + k[j][j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (k[i][i] + k[j][j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[t][i] * di + y[j] * k[t][j] * dj);
        }
    }

    // Offset from free vectors, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t], t) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { (ub + lb) / 2.0 };
    Solution { alpha, rho, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 2;
            let c = if l == 1 { gap / 2.0 } else { -gap / 2.0 };
            rows.push(vec![c + noise.sample(rng), c + noise.sample(rng)]);
            labels.push(l);
        }
        (rows, labels)
    }

    #[test]
    fn separable_blobs_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (rows, labels) = blobs(&mut rng, 40, 4.0);
        let model = svm_train(&rows, &labels, &SvmParams::new(Kernel::Linear, 1.0)).unwrap();
        assert_eq!(svm_predict(&model, &rows).unwrap(), labels);
        assert!(model.converged);
    }

    #[test]
    fn xor_with_rbf() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = vec![1, 1, 0, 0];
        let model = svm_train(&rows, &labels, &SvmParams::new(Kernel::Rbf { gamma: 1.0 }, 10.0)).unwrap();
        assert_eq!(svm_predict(&model, &rows).unwrap(), labels);
        let linear = svm_train(&rows, &labels, &SvmParams::new(Kernel::Linear, 10.0)).unwrap();
        assert_ne!(svm_predict(&linear, &rows).unwrap(), labels);
    }

    fn random_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<usize> = rows
            .iter()
            .map(|r| usize::from(r[0] + 0.5 * r[1] * r[1] + rng.random_range(-0.4..0.4) > 0.1))
            .collect();
        (rows, labels)
    }

    #[test]
    fn dual_feasibility_on_random_data() {
        for seed in 0..5 {
            let (rows, labels) = random_problem(seed);
            for kernel in [
                Kernel::Linear,
                Kernel::Rbf { gamma: 0.25 },
                Kernel::Poly { gamma: 0.25, degree: 3, coef0: 1.0 },
            ] {
                for c in [0.1, 1.0, 10.0] {
                    let model = svm_train(&rows, &labels, &SvmParams::new(kernel, c)).unwrap();
                    assert!(model.dual_sum().abs() < 1e-6, "{kernel:?} C={c}: {}", model.dual_sum());
                    for sv in &model.support {
                        assert!(sv.alpha > 0.0 && sv.alpha <= sv.upper + 1e-12);
                        let w = if sv.y > 0.0 { model.class_weights[0] } else { model.class_weights[1] };
                        assert!((sv.upper - w * c).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn support_vectors_respect_kkt_band() {
        let (rows, labels) = random_problem(7);
        let tol = 1e-3;
        let model = svm_train(&rows, &labels, &SvmParams::new(Kernel::Rbf { gamma: 0.25 }, 1.0)).unwrap();
        assert!(model.converged);
        for sv in &model.support {
            let margin = sv.y * model.decision_standardized(&sv.x);
            if sv.alpha < sv.upper {
                // Free vector: sits on the margin.
                assert!((margin - 1.0).abs() <= 2.0 * tol, "free margin {margin}");
            } else {
                // Bounded vector: inside or past the margin.
                assert!(margin <= 1.0 + 2.0 * tol, "bound margin {margin}");
            }
            let f = model.decision_standardized(&sv.x);
            if sv.alpha < sv.upper {
                assert!((-1.0 - 2.0 * tol..=1.0 + 2.0 * tol).contains(&f));
            }
        }
    }

    #[test]
    fn predict_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (rows, labels) = blobs(&mut rng, 20, 4.0);
        let model = svm_train(&rows, &labels, &SvmParams::new(Kernel::Linear, 1.0)).unwrap();
        assert!(svm_predict(&model, &[]).unwrap().is_empty());
        assert!(svm_predict(&model, &[vec![1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn single_class_fails() {
        let rows = vec![vec![0.0], vec![1.0]];
        let err = svm_train(&rows, &[1, 1], &SvmParams::new(Kernel::Linear, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn constant_column_is_zeroed() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.constant, vec![false, true]);
        assert!(s.std.iter().all(|v| *v > 0.0));
        assert_eq!(s.transform_row(&[2.0, 100.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn balanced_weights() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 0];
        let model = svm_train(&rows, &labels, &SvmParams::new(Kernel::Linear, 1.0)).unwrap();
        assert!((model.class_weights[0] - 2.5).abs() < 1e-12);
        assert!((model.class_weights[1] - 10.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let (rows, labels) = random_problem(3);
        let p = SvmParams::new(Kernel::Rbf { gamma: 0.5 }, 1.0);
        assert_eq!(svm_train(&rows, &labels, &p).unwrap(), svm_train(&rows, &labels, &p).unwrap());
    }
}
