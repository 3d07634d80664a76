//! SVM evaluation of feature subsets over folds, metrics, and the PCA
//! baseline.

mod metrics;
mod pca;
mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FoldPlan, FoldRoles, FoldScheme};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

pub use metrics::{compute_metrics, Metric, MetricReport};
pub use pca::Pca;
pub use svm::{
    svm_predict, svm_train, ClassWeightMode, Kernel, Standardizer, SupportVector, SvmModel,
    SvmParams,
};

/// Kernel family as configured; `gamma: None` means `1 / n_features`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf {
        #[serde(default)]
        gamma: Option<f64>,
    },
    Poly {
        #[serde(default = "default_degree")]
        degree: u32,
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default = "default_coef0")]
        coef0: f64,
    },
}

fn default_degree() -> u32 {
    3
}

fn default_coef0() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn resolve(&self, n_features: usize) -> Kernel {
        let auto = 1.0 / n_features.max(1) as f64;
        match *self {
            KernelSpec::Linear => Kernel::Linear,
            KernelSpec::Rbf { gamma } => Kernel::Rbf {
                gamma: gamma.unwrap_or(auto),
            },
            KernelSpec::Poly { degree, gamma, coef0 } => Kernel::Poly {
                gamma: gamma.unwrap_or(auto),
                degree,
                coef0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub kernels: Vec<KernelSpec>,
    pub c_grid: Vec<f64>,
    pub class_weight: ClassWeightMode,
    /// Metric used to choose the kernel on eval rows.
    pub metric: Metric,
    pub positive_class: usize,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Recorded for reproducibility; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            kernels: vec![
                KernelSpec::Linear,
                KernelSpec::Rbf { gamma: None },
                KernelSpec::Poly {
                    degree: 3,
                    gamma: None,
                    coef0: 1.0,
                },
            ],
            c_grid: vec![0.1, 1.0, 10.0],
            class_weight: ClassWeightMode::Balanced,
            metric: Metric::Accuracy,
            positive_class: 1,
            tolerance: 1e-3,
            max_iter: 1_000_000,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.c_grid.is_empty() {
            return Err(Error::Config("kernel list and C grid must be non-empty".into()));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("C values must be positive, got {c}")));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("solver tolerance must be positive".into()));
        }
        Ok(())
    }

    fn params(&self, kernel: Kernel, c: f64) -> SvmParams {
        SvmParams {
            kernel,
            c,
            class_weight: self.class_weight,
            positive_class: self.positive_class,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
        }
    }
}

/// Result of one fold: the kernel picked on eval rows and its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub test_fold: usize,
    pub eval_fold: usize,
    pub feature_ids: Vec<usize>,
    pub kernel: Option<Kernel>,
    pub c: Option<f64>,
    pub eval: Option<MetricReport>,
    /// Present only when test rows were scored.
    pub test: Option<MetricReport>,
    pub failure: Option<String>,
}

impl FoldOutcome {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn eval_metric(&self, metric: Metric) -> Option<f64> {
        self.eval.map(|m| m.get(metric))
    }

    pub fn test_metric(&self, metric: Metric) -> Option<f64> {
        self.test.map(|m| m.get(metric))
    }
}

/// Row data for one fold, already reduced to the columns under evaluation.
pub(crate) struct FoldData {
    pub train: (Vec<Vec<f64>>, Vec<usize>),
    pub eval: (Vec<Vec<f64>>, Vec<usize>),
    pub test: Option<(Vec<Vec<f64>>, Vec<usize>)>,
}

struct Fitted {
    kernel: Kernel,
    c: f64,
    eval: MetricReport,
    test: Option<MetricReport>,
}

fn fit_fold(data: &FoldData, config: &EvalConfig) -> Result<Fitted> {
    let width = data.train.0.first().map(Vec::len).unwrap_or(0);
    let grid: Vec<(Kernel, f64)> = config
        .kernels
        .iter()
        .flat_map(|k| config.c_grid.iter().map(move |&c| (k.resolve(width), c)))
        .collect();
    let candidates: Vec<Result<(SvmModel, MetricReport)>> = grid
        .par_iter()
        .map(|&(kernel, c)| {
            let model = svm_train(&data.train.0, &data.train.1, &config.params(kernel, c))?;
            let predicted = svm_predict(&model, &data.eval.0)?;
            let report = compute_metrics(&predicted, &data.eval.1, config.positive_class)?;
            Ok((model, report))
        })
        .collect();
    let mut best: Option<(SvmModel, MetricReport)> = None;
    for candidate in candidates {
        let (model, report) = candidate?;
        let better = match &best {
            None => true,
            Some((_, b)) => report.get(config.metric) > b.get(config.metric),
        };
        if better {
            best = Some((model, report));
        }
    }
    let (model, eval) = best.ok_or_else(|| Error::Config("empty kernel grid".into()))?;
    let test = match &data.test {
        Some((rows, labels)) if !rows.is_empty() => {
            let predicted = svm_predict(&model, rows)?;
            Some(compute_metrics(&predicted, labels, config.positive_class)?)
        }
        _ => None,
    };
    Ok(Fitted {
        kernel: model.kernel,
        c: model.c,
        eval,
        test,
    })
}

pub(crate) fn outcome_from(
    roles: &FoldRoles,
    feature_ids: &[usize],
    data: &FoldData,
    config: &EvalConfig,
) -> FoldOutcome {
    let mut outcome = FoldOutcome {
        test_fold: roles.test_fold,
        eval_fold: roles.eval_fold,
        feature_ids: feature_ids.to_vec(),
        kernel: None,
        c: None,
        eval: None,
        test: None,
        failure: None,
    };
    match fit_fold(data, config) {
        Ok(f) => {
            outcome.kernel = Some(f.kernel);
            outcome.c = Some(f.c);
            outcome.eval = Some(f.eval);
            outcome.test = f.test;
        }
        Err(e) => {
            log::warn!("fold {} failed: {e}", roles.test_fold);
            outcome.failure = Some(e.to_string());
        }
    }
    outcome
}

fn gather(matrix: &FeatureMatrix, labels: &[usize], rows: &[usize], cols: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        matrix.submatrix(rows, cols),
        rows.iter().map(|&r| labels[r]).collect(),
    )
}

fn check_inputs(matrix: &FeatureMatrix, labels: &[usize], feature_ids: &[usize]) -> Result<()> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::Argument(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    if feature_ids.is_empty() {
        return Err(Error::Argument("feature set is empty".into()));
    }
    if let Some(id) = feature_ids.iter().find(|&&id| id >= matrix.n_cols()) {
        return Err(Error::Argument(format!(
            "feature id {id} out of range ({} columns)",
            matrix.n_cols()
        )));
    }
    Ok(())
}

/// Trains on each fold's train rows, picks the kernel on its eval rows, and
/// scores test rows only when `with_test` is set.
pub fn evaluate_on_roles(
    matrix: &FeatureMatrix,
    labels: &[usize],
    feature_ids: &[usize],
    roles: &[FoldRoles],
    config: &EvalConfig,
    with_test: bool,
) -> Result<Vec<FoldOutcome>> {
    check_inputs(matrix, labels, feature_ids)?;
    config.validate()?;
    Ok(roles
        .par_iter()
        .map(|r| {
            let data = FoldData {
                train: gather(matrix, labels, &r.train, feature_ids),
                eval: gather(matrix, labels, &r.eval, feature_ids),
                test: with_test.then(|| gather(matrix, labels, &r.test, feature_ids)),
            };
            outcome_from(r, feature_ids, &data, config)
        })
        .collect())
}

/// Every fold takes a turn as the test fold; the next fold is its eval fold.
pub fn evaluate_feature_set(
    matrix: &FeatureMatrix,
    labels: &[usize],
    feature_ids: &[usize],
    plan: &FoldPlan,
    config: &EvalConfig,
) -> Result<Vec<FoldOutcome>> {
    if plan.assignments.len() != matrix.n_rows() {
        return Err(Error::Argument(format!(
            "fold plan covers {} rows, matrix has {}",
            plan.assignments.len(),
            matrix.n_rows()
        )));
    }
    let roles = plan.schedule(FoldScheme::Rotating)?;
    evaluate_on_roles(matrix, labels, feature_ids, &roles, config, true)
}

/// PCA fitted on each fold's train rows, then the same SVM selection on the
/// projected rows.
pub fn pca_baseline(
    matrix: &FeatureMatrix,
    labels: &[usize],
    roles: &[FoldRoles],
    n_components: usize,
    config: &EvalConfig,
) -> Result<Vec<(FoldOutcome, Option<Pca>)>> {
    let all: Vec<usize> = (0..matrix.n_cols()).collect();
    check_inputs(matrix, labels, &all)?;
    config.validate()?;
    let limit = roles
        .iter()
        .map(|r| r.train.len())
        .min()
        .unwrap_or(0)
        .min(matrix.n_cols());
    if n_components == 0 || n_components > limit {
        return Err(Error::Argument(format!(
            "n_components = {n_components} must be in 1..={limit}"
        )));
    }
    roles
        .par_iter()
        .map(|r| {
            let (train_rows, train_labels) = gather(matrix, labels, &r.train, &all);
            let pca = Pca::fit(&train_rows, n_components)?;
            let project = |rows: &[usize]| {
                let (x, y) = gather(matrix, labels, rows, &all);
                (pca.project(&x), y)
            };
            let data = FoldData {
                train: (pca.project(&train_rows), train_labels),
                eval: project(&r.eval),
                test: Some(project(&r.test)),
            };
            let ids: Vec<usize> = (0..n_components).collect();
            Ok((outcome_from(r, &ids, &data, config), Some(pca)))
        })
        .collect()
}

/// Mean and minimum of a metric over non-failed folds.
pub fn summarize(outcomes: &[FoldOutcome], metric: Metric, test: bool) -> Option<(f64, f64)> {
    let values: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| if test { o.test_metric(metric) } else { o.eval_metric(metric) })
        .collect();
    if values.is_empty() {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Some((mean, min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_folds_from_labels;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn planted(seed: u64, n: usize) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                let mut r = vec![l as f64 * 10.0 + 0.1 * noise.sample(&mut rng)];
                r.extend((0..3).map(|_| noise.sample(&mut rng)));
                r
            })
            .collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_feature_scores_perfectly() {
        let (m, labels) = planted(1, 60);
        let plan = make_folds_from_labels(&labels, 5, 3).unwrap();
        let out = evaluate_feature_set(&m, &labels, &[0], &plan, &EvalConfig::default()).unwrap();
        assert_eq!(out.len(), 5);
        for o in &out {
            assert_eq!(o.test.unwrap().accuracy, 1.0);
        }
    }

    #[test]
    fn shuffled_labels_are_near_chance() {
        let (m, labels) = planted(2, 100);
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
        let plan = make_folds_from_labels(&shuffled, 5, 4).unwrap();
        let out = evaluate_feature_set(&m, &shuffled, &[0, 1, 2, 3], &plan, &EvalConfig::default()).unwrap();
        let (mean, _) = summarize(&out, Metric::Accuracy, true).unwrap();
        assert!((mean - 0.5).abs() <= 0.15, "{mean}");
    }

    #[test]
    fn rbf_chosen_when_linear_cannot_separate() {
        // Ring: class 1 inside radius 1, class 0 on radius 3.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let angle = rand_distr::Uniform::new(0.0, std::f64::consts::TAU).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..80 {
            let l = i % 2;
            let r = if l == 1 { 0.5 } else { 3.0 };
            let a = angle.sample(&mut rng);
            rows.push(vec![r * a.cos(), r * a.sin()]);
            labels.push(l);
        }
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let plan = make_folds_from_labels(&labels, 5, 1).unwrap();
        let config = EvalConfig {
            kernels: vec![KernelSpec::Linear, KernelSpec::Rbf { gamma: None }],
            c_grid: vec![1.0],
            ..EvalConfig::default()
        };
        let out = evaluate_feature_set(&m, &labels, &[0, 1], &plan, &config).unwrap();
        for o in &out {
            assert_eq!(o.kernel.unwrap().name(), "rbf");
        }
    }

    #[test]
    fn test_rows_do_not_touch_the_model() {
        let (m, labels) = planted(3, 60);
        let plan = make_folds_from_labels(&labels, 5, 2).unwrap();
        let roles = plan.schedule(FoldScheme::HiddenTest { test_fold: 0 }).unwrap();
        let mut mutated = m.clone();
        for &r in &roles[0].test {
            for c in 0..m.n_cols() {
                mutated.set(r, c, 1e6);
            }
        }
        let a = evaluate_on_roles(&m, &labels, &[0, 1], &roles, &EvalConfig::default(), false).unwrap();
        let b = evaluate_on_roles(&mutated, &labels, &[0, 1], &roles, &EvalConfig::default(), false).unwrap();
        assert_eq!(a, b);
        let c = evaluate_on_roles(&m, &labels, &[0, 1], &roles, &EvalConfig::default(), false).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn single_class_training_marks_fold_failed() {
        let (m, _) = planted(4, 20);
        let labels = vec![0; 20];
        let roles = vec![FoldRoles {
            test_fold: 0,
            eval_fold: 1,
            train: (0..12).collect(),
            eval: (12..16).collect(),
            test: (16..20).collect(),
        }];
        let out = evaluate_on_roles(&m, &labels, &[0], &roles, &EvalConfig::default(), true).unwrap();
        assert!(out[0].failed());
    }

    #[test]
    fn pca_rank_one_matches_full_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let labels: Vec<usize> = (0..60).map(|i| i % 2).collect();
        let base: Vec<f64> = labels.iter().map(|&l| l as f64 * 1.5 + noise.sample(&mut rng)).collect();
        let rows: Vec<Vec<f64>> = base.iter().map(|b| vec![*b, 2.0 * b, -0.5 * b]).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let plan = make_folds_from_labels(&labels, 5, 9).unwrap();
        let roles = plan.schedule(FoldScheme::Rotating).unwrap();
        let config = EvalConfig {
            kernels: vec![KernelSpec::Linear],
            ..EvalConfig::default()
        };
        let full = evaluate_on_roles(&m, &labels, &[0, 1, 2], &roles, &config, true).unwrap();
        let pca = pca_baseline(&m, &labels, &roles, 1, &config).unwrap();
        for (f, (p, _)) in full.iter().zip(&pca) {
            assert!((f.test.unwrap().accuracy - p.test.unwrap().accuracy).abs() < 1e-12);
        }
        assert!(pca_baseline(&m, &labels, &roles, 4, &config).is_err());
    }

    #[test]
    fn kernel_spec_json() {
        let k: Vec<KernelSpec> =
            serde_json::from_str(r#"[{"kind":"linear"},{"kind":"rbf"},{"kind":"poly","degree":2}]"#).unwrap();
        assert_eq!(k[1].resolve(4), Kernel::Rbf { gamma: 0.25 });
        assert_eq!(k[2].resolve(2), Kernel::Poly { gamma: 0.5, degree: 2, coef0: 1.0 });
    }
}
