use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use widefe_core::dataset::{load_dataset, DatasetManifest, SignalRecord};
use widefe_core::eval::{summarize, Metric};
use widefe_core::features::{FeatureExtractor, FeatureMatrix};
use widefe_core::recommend::{
    baseline_run, interpret, recommend_run, render_notes, RecommendConfig, Recommendation,
};
use widefe_core::SCHEMA_VERSION;

use crate::artifacts::{create_run_dir, init_logging, write_json, MetricsArtifact, MetricsBlock, METRICS_FILE};
use crate::format::{opt_sig6, sig6, table};
use crate::{InputError, Overrides};

pub struct RunPaths {
    pub id: String,
    pub dir: PathBuf,
}

fn open_run(out: &Path, command: &str, seed: Option<u64>) -> Result<RunPaths> {
    let (id, dir) = create_run_dir(out, command, seed)?;
    init_logging(Some(&dir))?;
    info!("run {id} in {}", dir.display());
    Ok(RunPaths { id, dir })
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RecommendConfig> {
    let mut config = match path {
        Some(p) => RecommendConfig::from_path(p)?,
        None => RecommendConfig::default(),
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn load_records(manifest: &Path) -> Result<(DatasetManifest, Vec<SignalRecord>)> {
    let manifest_data = DatasetManifest::from_path(manifest)?;
    let records = load_dataset(&manifest_data)?;
    info!("loaded {} records from {}", records.len(), manifest.display());
    Ok((manifest_data, records))
}

fn write_matrix(dir: &Path, matrix: &FeatureMatrix, extractor: &FeatureExtractor) -> Result<()> {
    let file = fs::File::create(dir.join("features.csv"))?;
    matrix.write_csv(file)?;
    let extras = serde_json::json!({
        "wavelet": extractor.wavelet.name(),
        "wavelet_votes": extractor.wavelet_votes,
        "dwt_depth": extractor.dwt_depth,
        "stft_window": extractor.stft_window,
        "stft_hop": extractor.stft_hop,
        "sample_rate_hz": extractor.sample_rate_hz,
        "config": extractor.config,
    });
    write_json(&dir.join("descriptors.json"), &matrix.sidecar(extras))
}

fn level_summary(matrix: &FeatureMatrix) -> String {
    let [l0, l1, l2] = matrix.level_counts();
    format!("N = {} columns (level 0: {l0}, level 1: {l1}, level 2: {l2})", matrix.n_cols())
}

pub fn extract(manifest: &Path, config: Option<&Path>, overrides: &Overrides, out: &Path) -> Result<PathBuf> {
    let config = load_config(config, overrides)?;
    let (_, records) = load_records(manifest)?;
    let run = open_run(out, "extract", None)?;
    let extractor = FeatureExtractor::fit(&records, None, &config.extraction)?;
    let matrix = extractor.build(&records, config.max_level_cap)?;
    write_matrix(&run.dir, &matrix, &extractor)?;
    println!("run {}: {}", run.id, run.dir.display());
    println!("{}", level_summary(&matrix));
    Ok(run.dir)
}

fn wide_metrics(rec: &Recommendation) -> MetricsArtifact {
    let mut blocks = vec![
        MetricsBlock::new("fe1", &rec.fe1.feature_ids, rec.fe1.level, &rec.fe1.test),
        MetricsBlock::new("fe2", &rec.fe2.feature_ids, rec.fe2.level, &rec.fe2.test),
    ];
    let mut headline = "fe2".to_string();
    if let Some(r) = &rec.refined {
        blocks.push(MetricsBlock::new("refined", &r.refinement.best, rec.fe2.level, &r.test));
        headline = "refined".to_string();
    }
    MetricsArtifact {
        schema_version: SCHEMA_VERSION,
        method: "wide".into(),
        metric: rec.metric,
        headline,
        level_reached: rec.level_reached,
        target_met: Some(rec.target_met),
        blocks,
    }
}

fn set_rows(metrics: &MetricsArtifact, rec: &Recommendation) -> Vec<Vec<String>> {
    metrics
        .blocks
        .iter()
        .map(|b| {
            let eval_min = match b.name.as_str() {
                "fe1" => Some(rec.fe1.eval_metric),
                "fe2" => Some(rec.fe2.min),
                _ => rec.refined.as_ref().and_then(|r| r.refinement.best_min),
            };
            let t = b.mean_test;
            vec![
                b.name.clone(),
                b.feature_count.to_string(),
                b.level.to_string(),
                opt_sig6(eval_min),
                opt_sig6(t.map(|m| m.accuracy)),
                opt_sig6(t.map(|m| m.sensitivity)),
                opt_sig6(t.map(|m| m.specificity)),
                opt_sig6(t.map(|m| m.precision)),
                opt_sig6(t.map(|m| m.f_score)),
            ]
        })
        .collect()
}

fn fold_rows(block: &MetricsBlock, metric: Metric) -> Vec<Vec<String>> {
    block
        .folds
        .iter()
        .map(|f| {
            vec![
                format!("{}/{}", f.test_fold, f.eval_fold),
                f.kernel.map(|k| k.name().to_string()).unwrap_or_else(|| "failed".into()),
                opt_sig6(f.c),
                opt_sig6(f.eval.map(|m| m.get(metric))),
                opt_sig6(f.test.map(|m| m.get(metric))),
            ]
        })
        .collect()
}

fn recommendation_text(rec: &Recommendation, metrics: &MetricsArtifact, matrix: &FeatureMatrix) -> Result<String> {
    let mut out = String::new();
    let status = if rec.target_met { "met" } else { "target not met; best-so-far reported" };
    out.push_str(&format!(
        "target: {} >= {} on every fold's eval rows: {status}\nlevel reached: {}\nmother wavelet: {}\n\n",
        rec.metric,
        sig6(rec.tau),
        rec.level_reached,
        rec.wavelet
    ));
    out.push_str(&format!("eval column: Fe1 best single fold, others min over folds ({})\n", rec.metric));
    out.push_str(&table(
        &["set", "features", "level", "eval", "test acc", "sens", "spec", "prec", "f1"],
        &set_rows(metrics, rec),
    ));
    if let Some(block) = metrics.headline_block() {
        out.push_str(&format!("\nper fold ({}, test/eval fold)\n", block.name));
        out.push_str(&table(&["fold", "kernel", "C", "eval", "test"], &fold_rows(block, rec.metric)));
    }
    out.push('\n');
    out.push_str(&render_notes("Fe1", &interpret(&rec.fe1.feature_ids, &matrix.descriptors)?));
    out.push_str(&render_notes("Fe2", &interpret(&rec.fe2.feature_ids, &matrix.descriptors)?));
    match &rec.refined {
        Some(r) => {
            out.push_str(&format!(
                "refinement: {} subsets of Fe2 evaluated\n",
                r.refinement.evaluation_count()
            ));
            out.push_str(&render_notes("refined", &interpret(&r.refinement.best, &matrix.descriptors)?));
        }
        None => {
            if let Some(note) = &rec.refinement_note {
                out.push_str(&format!("refinement skipped: {note}\n"));
            }
        }
    }
    out.push_str(&format!("\nloop: {}\n", rec.loop_reading));
    Ok(out)
}

pub fn recommend(manifest: &Path, config: Option<&Path>, overrides: &Overrides, out: &Path) -> Result<PathBuf> {
    let config = load_config(config, overrides)?;
    let Some(seed) = config.seed else {
        return Err(InputError("recommend needs --seed or a seed in the config".into()).into());
    };
    let (_, records) = load_records(manifest)?;
    let run = open_run(out, "recommend", Some(seed))?;
    write_json(&run.dir.join("config.json"), &config)?;
    let result = match recommend_run(&records, &config) {
        Ok(r) => r,
        Err(widefe_core::Error::RunWithTrace { reason, trace }) => {
            write_json(&run.dir.join("trace.json"), &trace)?;
            eprintln!("{}", serde_json::to_string_pretty(&trace)?);
            bail!(widefe_core::Error::Run(format!(
                "{reason}; trace written to {}",
                run.dir.join("trace.json").display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let rec = &result.recommendation;
    write_matrix(&run.dir, &result.matrix, &result.extractor)?;
    write_json(&run.dir.join("recommendation.json"), &recommendation_json(rec, &result.matrix)?)?;
    let metrics = wide_metrics(rec);
    write_json(&run.dir.join(METRICS_FILE), &metrics)?;
    let text = recommendation_text(rec, &metrics, &result.matrix)?;
    fs::write(run.dir.join("report.txt"), &text)?;
    println!("run {}: {}", run.id, run.dir.display());
    println!("{}", level_summary(&result.matrix));
    print!("{text}");
    if let Some((mean, _)) = summarize(&rec.fe1.test, Metric::Accuracy, true) {
        println!("Fe1 mean test accuracy: {}", sig6(mean));
    }
    if let Some((mean, _)) = summarize(&rec.fe2.test, Metric::Accuracy, true) {
        println!("Fe2 mean test accuracy: {}", sig6(mean));
    }
    Ok(run.dir)
}

/// The recommendation plus names and lineage notes for every reported set.
fn recommendation_json(rec: &Recommendation, matrix: &FeatureMatrix) -> Result<serde_json::Value> {
    let mut value = serde_json::to_value(rec)?;
    let mut notes = serde_json::Map::new();
    notes.insert("fe1".into(), serde_json::to_value(interpret(&rec.fe1.feature_ids, &matrix.descriptors)?)?);
    notes.insert("fe2".into(), serde_json::to_value(interpret(&rec.fe2.feature_ids, &matrix.descriptors)?)?);
    if let Some(r) = &rec.refined {
        notes.insert(
            "refined".into(),
            serde_json::to_value(interpret(&r.refinement.best, &matrix.descriptors)?)?,
        );
    }
    value["interpretation"] = serde_json::Value::Object(notes);
    Ok(value)
}

pub fn baseline_pca(manifest: &Path, config: Option<&Path>, overrides: &Overrides, out: &Path) -> Result<PathBuf> {
    let config = load_config(config, overrides)?;
    let Some(seed) = config.seed else {
        return Err(InputError("baseline-pca needs --seed or a seed in the config".into()).into());
    };
    let (_, records) = load_records(manifest)?;
    let run = open_run(out, "baseline-pca", Some(seed))?;
    write_json(&run.dir.join("config.json"), &config)?;
    let result = baseline_run(&records, &config)?;
    write_matrix(&run.dir, &result.matrix, &result.extractor)?;
    let blocks: Vec<MetricsBlock> = result
        .results
        .iter()
        .map(|r| {
            let ids: Vec<usize> = (0..r.n_components).collect();
            MetricsBlock::new(format!("pca_{}", r.n_components), &ids, config.max_level_cap, &r.outcomes)
        })
        .collect();
    // Headline chosen on eval rows: best mean eval metric, fewer components on ties.
    let headline = blocks
        .iter()
        .max_by(|a, b| {
            let score = |blk: &MetricsBlock| blk.mean_eval.map(|m| m.get(config.metric)).unwrap_or(f64::NEG_INFINITY);
            score(a).total_cmp(&score(b)).then(b.feature_count.cmp(&a.feature_count))
        })
        .map(|b| b.name.clone())
        .unwrap_or_default();
    let metrics = MetricsArtifact {
        schema_version: SCHEMA_VERSION,
        method: "pca_svm".into(),
        metric: config.metric,
        headline,
        level_reached: config.max_level_cap,
        target_met: None,
        blocks,
    };
    write_json(&run.dir.join(METRICS_FILE), &metrics)?;
    let explained = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "results": result.results,
    });
    write_json(&run.dir.join("pca.json"), &explained)?;
    let rows: Vec<Vec<String>> = metrics
        .blocks
        .iter()
        .map(|b| {
            vec![
                b.name.clone(),
                opt_sig6(b.mean_eval.map(|m| m.get(config.metric))),
                opt_sig6(b.mean_test.map(|m| m.accuracy)),
                opt_sig6(b.mean_test.map(|m| m.f_score)),
            ]
        })
        .collect();
    let text = format!(
        "PCA+SVM over {} columns (headline {})\n{}",
        result.matrix.n_cols(),
        metrics.headline,
        table(&["block", "eval", "test acc", "test f1"], &rows)
    );
    fs::write(run.dir.join("report.txt"), &text)?;
    println!("run {}: {}", run.id, run.dir.display());
    print!("{text}");
    Ok(run.dir)
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "run",
    "method",
    "accuracy",
    "sensitivity",
    "specificity",
    "precision",
    "f1",
    "features",
    "level",
];

/// Run directories under `dir` (or `dir` itself) holding a metrics file.
fn find_runs(dir: &Path) -> Result<Vec<(String, MetricsArtifact)>> {
    let mut candidates = vec![dir.to_path_buf()];
    let mut children: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    candidates.extend(children);
    let mut runs = Vec::new();
    for c in candidates {
        let path = c.join(METRICS_FILE);
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        let metrics: MetricsArtifact = serde_json::from_str(&text)
            .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        let name = c.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        runs.push((name, metrics));
    }
    Ok(runs)
}

pub fn report(dir: &Path) -> Result<()> {
    init_logging(None)?;
    if !dir.is_dir() {
        return Err(InputError(format!("{} is not a directory", dir.display())).into());
    }
    let runs = find_runs(dir)?;
    if runs.is_empty() {
        return Err(InputError(format!("no runs with {METRICS_FILE} under {}", dir.display())).into());
    }
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|(name, m)| {
            let block = m.headline_block();
            let t = block.and_then(|b| b.mean_test);
            vec![
                name.clone(),
                m.method.clone(),
                opt_sig6(t.map(|x| x.accuracy)),
                opt_sig6(t.map(|x| x.sensitivity)),
                opt_sig6(t.map(|x| x.specificity)),
                opt_sig6(t.map(|x| x.precision)),
                opt_sig6(t.map(|x| x.f_score)),
                block.map(|b| b.feature_count.to_string()).unwrap_or_else(|| "-".into()),
                m.level_reached.to_string(),
            ]
        })
        .collect();
    let text = table(&SUMMARY_HEADER, &rows);
    print!("{text}");
    let mut writer = csv::Writer::from_path(dir.join("summary.csv"))?;
    writer.write_record(SUMMARY_HEADER)?;
    for row in &rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    fs::write(dir.join("summary.txt"), &text)?;
    Ok(())
}
