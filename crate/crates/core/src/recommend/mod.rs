//! The recommendation loop: escalate the feature level and subset size until
//! a candidate set clears the target on every fold's eval rows, then report
//! the best any-fold set (Fe1), the most consistent set (Fe2) and an
//! optional exhaustive refinement of Fe2.

mod interpret;
mod refine;

use std::collections::HashMap;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_labels, make_folds, FoldPlan, FoldRoles, FoldScheme, SignalRecord};
use crate::eval::{evaluate_on_roles, pca_baseline, EvalConfig, FoldOutcome, Metric};
use crate::features::{ExtractionConfig, FeatureExtractor, FeatureMatrix};
use crate::selection::{
    mrmr_select, mrms_select, union_recommend, SelectionResult, SelectorConfig,
};
use crate::{Error, Result, SCHEMA_VERSION};

pub use interpret::{describe, interpret, render_notes, FeatureNote};
pub use refine::{exhaustive_refine, Refinement, SubsetScore, MAX_REFINE_CAP};

/// How the loop reads the iteration rule; written into every trace.
pub const LOOP_READING: &str =
    "each iteration advances k through the schedule, then the feature level; \
     selections are recomputed per fold on train+eval rows and are not forced to be disjoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaSettings {
    pub n_components: Vec<usize>,
}

impl Default for PcaSettings {
    fn default() -> Self {
        Self {
            n_components: vec![5, 10, 15],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommendConfig {
    pub tau: f64,
    pub metric: Metric,
    pub k_schedule: Vec<usize>,
    /// Largest Fe2 size that gets exhaustive refinement.
    pub c: usize,
    pub p: usize,
    pub seed: Option<u64>,
    pub fold_scheme: FoldScheme,
    pub max_level_cap: u8,
    pub selector: SelectorConfig,
    pub evaluation: EvalConfig,
    pub extraction: ExtractionConfig,
    pub pca: PcaSettings,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        Self {
            tau: 0.85,
            metric: Metric::Accuracy,
            k_schedule: vec![5, 10, 15, 20],
            c: 8,
            p: 5,
            seed: None,
            fold_scheme: FoldScheme::default(),
            max_level_cap: 2,
            selector: SelectorConfig::default(),
            evaluation: EvalConfig::default(),
            extraction: ExtractionConfig::default(),
            pca: PcaSettings::default(),
        }
    }
}

impl RecommendConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::load(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be finite and > 0, got {}", self.tau)));
        }
        if self.k_schedule.is_empty() {
            return Err(Error::Config("k_schedule is empty".into()));
        }
        if self.k_schedule.contains(&0) {
            return Err(Error::Config("every k in k_schedule must be >= 1".into()));
        }
        if self.c > MAX_REFINE_CAP {
            return Err(Error::Config(format!("c = {} exceeds {MAX_REFINE_CAP}", self.c)));
        }
        if self.max_level_cap > 2 {
            return Err(Error::Config(format!(
                "max_level_cap {} outside 0..=2",
                self.max_level_cap
            )));
        }
        if !(self.selector.mrms.beta >= 0.0) {
            return Err(Error::Config("mrms beta must be >= 0".into()));
        }
        self.evaluation.validate()?;
        self.extraction.validate()
    }

    /// Evaluation settings with the configured metric driving kernel choice.
    pub fn effective_evaluation(&self) -> EvalConfig {
        EvalConfig {
            metric: self.metric,
            ..self.evaluation.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSelection {
    pub test_fold: usize,
    pub eval_fold: usize,
    pub mrmr: SelectionResult,
    pub mrms: SelectionResult,
    pub union: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub feature_ids: Vec<usize>,
    pub outcomes: Vec<FoldOutcome>,
    /// Eval metric per fold; failed folds count as 0.
    pub per_fold: Vec<f64>,
    pub min: f64,
    pub mean: f64,
    pub meets_target: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    TargetMet,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub level: u8,
    pub k: usize,
    pub n_columns: usize,
    pub selections: Vec<FoldSelection>,
    pub candidates: Vec<Candidate>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fe1 {
    pub feature_ids: Vec<usize>,
    pub names: Vec<String>,
    pub level: u8,
    pub k: usize,
    /// Position of the attaining fold in the schedule.
    pub fold: usize,
    pub eval_metric: f64,
    pub test: Vec<FoldOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fe2 {
    pub feature_ids: Vec<usize>,
    pub names: Vec<String>,
    pub level: u8,
    pub k: usize,
    pub eval_per_fold: Vec<f64>,
    pub min: f64,
    pub mean: f64,
    pub test: Vec<FoldOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedSet {
    pub refinement: Refinement,
    pub names: Vec<String>,
    pub test: Vec<FoldOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub p: usize,
    pub seed: u64,
    pub scheme: FoldScheme,
    pub assignments: Vec<usize>,
    /// `(test_fold, eval_fold)` per scheduled fold.
    pub roles: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub schema_version: u32,
    pub tau: f64,
    pub metric: Metric,
    pub target_met: bool,
    pub level_reached: u8,
    pub fe1: Fe1,
    pub fe2: Fe2,
    pub refined: Option<RefinedSet>,
    /// Why refinement did not run, when it did not.
    pub refinement_note: Option<String>,
    pub wavelet: String,
    pub wavelet_votes: Vec<(String, usize)>,
    pub folds: FoldSummary,
    pub loop_reading: String,
    pub trace: Vec<TraceStep>,
}

impl Recommendation {
    /// The set a caller should use: refined Fe2 when refinement ran.
    pub fn final_set(&self) -> &[usize] {
        match &self.refined {
            Some(r) => &r.refinement.best,
            None => &self.fe2.feature_ids,
        }
    }
}

/// Everything a recommendation run produced, including the widest matrix
/// built, whose columns cover every id in the recommendation.
#[derive(Debug, Clone)]
pub struct RecommendRun {
    pub recommendation: Recommendation,
    pub matrix: FeatureMatrix,
    pub labels: Vec<usize>,
    pub roles: Vec<FoldRoles>,
    pub extractor: FeatureExtractor,
}

/// Eval metric per outcome, 0 for failed folds.
pub(crate) fn fold_scores(outcomes: &[FoldOutcome], metric: Metric) -> Vec<f64> {
    outcomes
        .iter()
        .map(|o| o.eval_metric(metric).unwrap_or(0.0))
        .collect()
}

fn clamp_schedule(schedule: &[usize], n_cols: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &k in schedule {
        let k = k.min(n_cols);
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn names(matrix: &FeatureMatrix, ids: &[usize]) -> Vec<String> {
    ids.iter().map(|&i| matrix.descriptors[i].name.clone()).collect()
}

/// Per-fold selector output at the largest k; shorter k values are prefixes.
fn select_for_folds(
    matrix: &FeatureMatrix,
    labels: &[usize],
    roles: &[FoldRoles],
    k_max: usize,
    config: &SelectorConfig,
) -> Result<Vec<(SelectionResult, SelectionResult)>> {
    let mut memo: HashMap<Vec<usize>, (SelectionResult, SelectionResult)> = HashMap::new();
    let mut out = Vec::with_capacity(roles.len());
    for r in roles {
        let mut rows = r.search_rows();
        rows.sort_unstable();
        if let Some(hit) = memo.get(&rows) {
            out.push(hit.clone());
            continue;
        }
        let sub = matrix.select_rows(&rows);
        let sub_labels: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
        let (x, y) = rayon::join(
            || mrmr_select(&sub, &sub_labels, k_max, config.mrmr.objective),
            || mrms_select(&sub, &sub_labels, k_max, config.mrms.beta),
        );
        let pair = (x?, y?);
        memo.insert(rows, pair.clone());
        out.push(pair);
    }
    Ok(out)
}

fn truncate(sel: &SelectionResult, k: usize) -> SelectionResult {
    SelectionResult {
        method: sel.method,
        k,
        ranked_ids: sel.ranked_ids[..k].to_vec(),
        step_scores: sel.step_scores[..k].to_vec(),
    }
}

struct Located<'a> {
    level: u8,
    k: usize,
    order: usize,
    candidate: &'a Candidate,
}

fn locate(trace: &[TraceStep]) -> Vec<Located<'_>> {
    let mut out = Vec::new();
    for step in trace {
        for c in &step.candidates {
            out.push(Located {
                level: step.level,
                k: step.k,
                order: out.len(),
                candidate: c,
            });
        }
    }
    out
}

/// Fe1: the single highest eval metric over (set, fold); earliest wins ties.
fn pick_fe1<'a>(all: &'a [Located<'a>]) -> Option<(&'a Located<'a>, usize, f64)> {
    let mut best: Option<(&Located, usize, f64)> = None;
    for loc in all {
        for (fold, o) in loc.candidate.outcomes.iter().enumerate() {
            if o.failed() {
                continue;
            }
            let v = loc.candidate.per_fold[fold];
            if best.is_none_or(|b| v > b.2) {
                best = Some((loc, fold, v));
            }
        }
    }
    best
}

/// Fe2: max of the min-fold metric, then mean, then smaller k, then lower
/// level, then trace order.
fn pick_fe2<'a>(all: &'a [Located<'a>]) -> Option<&'a Located<'a>> {
    all.iter().min_by(|a, b| {
        b.candidate
            .min
            .total_cmp(&a.candidate.min)
            .then(b.candidate.mean.total_cmp(&a.candidate.mean))
            .then(a.k.cmp(&b.k))
            .then(a.level.cmp(&b.level))
            .then(a.order.cmp(&b.order))
    })
}

/// Runs the loop; see [`recommend_run`] for the variant that also returns
/// the matrix and fold roles.
pub fn recommend(records: &[SignalRecord], config: &RecommendConfig) -> Result<Recommendation> {
    recommend_run(records, config).map(|r| r.recommendation)
}

/// Labels, folds and a fitted extractor shared by the recommender and the
/// PCA baseline.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub labels: Vec<usize>,
    pub plan: FoldPlan,
    pub roles: Vec<FoldRoles>,
    pub extractor: FeatureExtractor,
    pub seed: u64,
}

/// Validates the config, plans folds and fits the extractor on rows that are
/// never test rows.
pub fn prepare(records: &[SignalRecord], config: &RecommendConfig) -> Result<Prepared> {
    config.validate()?;
    let seed = config
        .seed
        .ok_or_else(|| Error::Config("a seed is required (flag or config)".into()))?;
    let classes = class_labels(records);
    if classes.len() != 2 {
        return Err(Error::Config(format!(
            "binary classification only; found {} classes",
            classes.len()
        )));
    }
    if !classes.contains(&config.evaluation.positive_class) {
        return Err(Error::Config(format!(
            "positive class {} not present in the labels {classes:?}",
            config.evaluation.positive_class
        )));
    }
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let plan = make_folds(records, config.p, seed)?;
    let roles = plan.schedule(config.fold_scheme)?;
    let mut hidden = vec![false; records.len()];
    for r in &roles {
        for &i in &r.test {
            hidden[i] = true;
        }
    }
    // Under full rotation every row is a test row somewhere, so all rows vote.
    let reference: Vec<usize> = (0..records.len()).filter(|&i| !hidden[i]).collect();
    let reference = (!reference.is_empty()).then_some(reference);
    let extractor = FeatureExtractor::fit(records, reference.as_deref(), &config.extraction)?;
    Ok(Prepared {
        labels,
        plan,
        roles,
        extractor,
        seed,
    })
}

pub fn recommend_run(records: &[SignalRecord], config: &RecommendConfig) -> Result<RecommendRun> {
    let Prepared {
        labels,
        plan,
        roles,
        extractor,
        seed,
    } = prepare(records, config)?;
    let eval_config = config.effective_evaluation();

    let mut trace: Vec<TraceStep> = Vec::new();
    let mut matrices: Vec<FeatureMatrix> = Vec::new();
    let mut evaluated: HashMap<Vec<usize>, Vec<FoldOutcome>> = HashMap::new();
    let mut target_met = false;
    'levels: for level in 0..=config.max_level_cap {
        let matrix = extractor.build(records, level)?;
        info!("level {level}: {} columns", matrix.n_cols());
        let schedule = clamp_schedule(&config.k_schedule, matrix.n_cols());
        let k_max = *schedule.iter().max().expect("schedule is non-empty");
        let selections = select_for_folds(&matrix, &labels, &roles, k_max, &config.selector)?;
        for &k in &schedule {
            let mut fold_selections = Vec::with_capacity(roles.len());
            let mut sets: Vec<Vec<usize>> = Vec::new();
            for (r, (x, y)) in roles.iter().zip(&selections) {
                let (x, y) = (truncate(x, k), truncate(y, k));
                let union = union_recommend(&x, &y, k)?;
                if !sets.contains(&union) {
                    sets.push(union.clone());
                }
                fold_selections.push(FoldSelection {
                    test_fold: r.test_fold,
                    eval_fold: r.eval_fold,
                    mrmr: x,
                    mrms: y,
                    union,
                });
            }
            let fresh: Vec<&Vec<usize>> = sets.iter().filter(|s| !evaluated.contains_key(*s)).collect();
            let results = fresh
                .par_iter()
                .map(|ids| evaluate_on_roles(&matrix, &labels, ids, &roles, &eval_config, false))
                .collect::<Result<Vec<_>>>()?;
            for (ids, outcomes) in fresh.into_iter().zip(results) {
                evaluated.insert(ids.clone(), outcomes);
            }
            let candidates: Vec<Candidate> = sets
                .into_iter()
                .map(|ids| {
                    let outcomes = evaluated[&ids].clone();
                    let per_fold = fold_scores(&outcomes, config.metric);
                    let min = per_fold.iter().copied().fold(f64::INFINITY, f64::min);
                    let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
                    let meets_target = outcomes
                        .iter()
                        .all(|o| o.eval_metric(config.metric).is_some_and(|v| v >= config.tau));
                    Candidate {
                        feature_ids: ids,
                        outcomes,
                        per_fold,
                        min,
                        mean,
                        meets_target,
                    }
                })
                .collect();
            let met = candidates.iter().any(|c| c.meets_target);
            info!(
                "level {level} k {k}: best min-fold {} = {:.4}{}",
                config.metric,
                candidates.iter().map(|c| c.min).fold(f64::NEG_INFINITY, f64::max),
                if met { " (target met)" } else { "" }
            );
            trace.push(TraceStep {
                level,
                k,
                n_columns: matrix.n_cols(),
                selections: fold_selections,
                candidates,
                decision: if met { Decision::TargetMet } else { Decision::Continue },
            });
            if met {
                target_met = true;
                matrices.push(matrix);
                break 'levels;
            }
        }
        matrices.push(matrix);
    }
    if !target_met {
        if let Some(last) = trace.last_mut() {
            last.decision = Decision::Exhausted;
        }
    }
    let level_reached = trace.last().map(|s| s.level).unwrap_or(0);

    let all = locate(&trace);
    let any_success = all
        .iter()
        .any(|l| l.candidate.outcomes.iter().any(|o| !o.failed()));
    if !any_success {
        return Err(Error::RunWithTrace {
            reason: "every fold failed for every candidate set".into(),
            trace: Box::new(serde_json::to_value(&trace)?),
        });
    }
    let (fe1_loc, fe1_fold, fe1_value) = pick_fe1(&all).expect("a successful fold exists");
    let fe2_loc = pick_fe2(&all).expect("trace is non-empty");
    let widest = matrices.last().expect("at least one level built");
    let fe1_ids = fe1_loc.candidate.feature_ids.clone();
    let fe2_ids = fe2_loc.candidate.feature_ids.clone();
    let (fe1_level, fe1_k) = (fe1_loc.level, fe1_loc.k);
    let (fe2_level, fe2_k) = (fe2_loc.level, fe2_loc.k);
    let fe2_scores = (
        fe2_loc.candidate.per_fold.clone(),
        fe2_loc.candidate.min,
        fe2_loc.candidate.mean,
    );
    drop(all);

    let refinement = exhaustive_refine(
        widest,
        &labels,
        &roles,
        &fe2_ids,
        config.c,
        &eval_config,
        config.metric,
    )?;

    // Decisions are frozen; test rows are scored once per reported set.
    let test_of = |ids: &[usize]| evaluate_on_roles(widest, &labels, ids, &roles, &eval_config, true);
    let fe1 = Fe1 {
        names: names(widest, &fe1_ids),
        test: test_of(&fe1_ids)?,
        feature_ids: fe1_ids,
        level: fe1_level,
        k: fe1_k,
        fold: fe1_fold,
        eval_metric: fe1_value,
    };
    let fe2 = Fe2 {
        names: names(widest, &fe2_ids),
        test: test_of(&fe2_ids)?,
        feature_ids: fe2_ids,
        level: fe2_level,
        k: fe2_k,
        eval_per_fold: fe2_scores.0,
        min: fe2_scores.1,
        mean: fe2_scores.2,
    };
    let refinement_note = refinement.skipped.clone();
    let refined = match refinement_note {
        None => Some(RefinedSet {
            names: names(widest, &refinement.best),
            test: test_of(&refinement.best)?,
            refinement,
        }),
        Some(ref note) => {
            info!("refinement skipped: {note}");
            None
        }
    };

    let recommendation = Recommendation {
        schema_version: SCHEMA_VERSION,
        tau: config.tau,
        metric: config.metric,
        target_met,
        level_reached,
        fe1,
        fe2,
        refined,
        refinement_note,
        wavelet: extractor.wavelet.name().to_string(),
        wavelet_votes: extractor.wavelet_votes.clone(),
        folds: FoldSummary {
            p: plan.p,
            seed,
            scheme: config.fold_scheme,
            assignments: plan.assignments.clone(),
            roles: roles.iter().map(|r| (r.test_fold, r.eval_fold)).collect(),
        },
        loop_reading: LOOP_READING.to_string(),
        trace,
    };
    Ok(RecommendRun {
        recommendation,
        matrix: matrices.pop().expect("at least one level built"),
        labels,
        roles,
        extractor,
    })
}

/// PCA+SVM results for one component count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub n_components: usize,
    pub outcomes: Vec<FoldOutcome>,
    /// Explained-variance ratio per component, per fold.
    pub explained_variance_ratio: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub matrix: FeatureMatrix,
    pub labels: Vec<usize>,
    pub roles: Vec<FoldRoles>,
    pub extractor: FeatureExtractor,
    pub results: Vec<PcaResult>,
}

/// PCA+SVM over the configured component grid, on the full feature bank up
/// to `max_level_cap`, using the same folds the recommender would.
pub fn baseline_run(records: &[SignalRecord], config: &RecommendConfig) -> Result<BaselineRun> {
    let Prepared {
        labels,
        roles,
        extractor,
        ..
    } = prepare(records, config)?;
    if config.pca.n_components.is_empty() {
        return Err(Error::Config("pca n_components grid is empty".into()));
    }
    let matrix = extractor.build(records, config.max_level_cap)?;
    let limit = roles
        .iter()
        .map(|r| r.train.len())
        .min()
        .unwrap_or(0)
        .min(matrix.n_cols());
    let grid = clamp_schedule(&config.pca.n_components, limit);
    if grid.contains(&0) {
        return Err(Error::Config("pca n_components must be >= 1".into()));
    }
    let eval_config = config.effective_evaluation();
    let results = grid
        .iter()
        .map(|&n| {
            let folds = pca_baseline(&matrix, &labels, &roles, n, &eval_config)?;
            let explained_variance_ratio = folds
                .iter()
                .map(|(_, p)| p.as_ref().map(|p| p.explained_variance_ratio.clone()).unwrap_or_default())
                .collect();
            Ok(PcaResult {
                n_components: n,
                outcomes: folds.into_iter().map(|(o, _)| o).collect(),
                explained_variance_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselineRun {
        matrix,
        labels,
        roles,
        extractor,
        results,
    })
}
