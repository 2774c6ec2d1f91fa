//! Stage bodies over explicit paths. The runner adds caching on top; the
//! CLI calls these directly.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vibwalk_core::analysis::{
    grain_from_index, merge_and_eval, merge_map, noise_eval, retrain_merged, wet_dry_eval, write_report, CvSummary,
};
use vibwalk_core::dsp::{BandwidthVariant, FeatureKind};
use vibwalk_core::ingest::{build_index, cross_user_folds, load_manifest, within_user_folds, SegmentIndex, SplitMode, SplitPlan};
use vibwalk_core::model::{load_checkpoint, predict, save_checkpoint, cross_validate, CvReport, Dataset, Metrics};
use vibwalk_core::pipeline::{featurize, FeatureEntry, FeatureSet, Modality};
use vibwalk_core::{Condition, Material};
use vibwalk_mapping::simulate::{client_reports, write_track, TrackRow};
use vibwalk_mapping::{build_map, render_html, HtmlOptions, ReportStore};

use crate::config::{Analysis, ExperimentConfig, MapSpec};

pub type StageError = Box<dyn std::error::Error + Send + Sync>;
pub type StageResult<T> = Result<T, StageError>;

fn err(msg: impl Into<String>) -> StageError {
    msg.into().into()
}

fn write_json<V: Serialize>(path: &Path, v: &V) -> StageResult<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(v)?)?;
    Ok(())
}

fn read_json<V: for<'de> Deserialize<'de>>(path: &Path) -> StageResult<V> {
    let text = std::fs::read(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&text)?)
}

/// Manifest to segment index.
pub fn ingest(manifest_path: &Path, out: &Path) -> StageResult<Value> {
    let manifest = load_manifest(manifest_path)?;
    let index = build_index(&manifest, manifest_path);
    if index.segments.is_empty() {
        return Err(err(format!("no usable recordings ({} sessions skipped)", index.skipped.len())));
    }
    if let Some(p) = out.parent() {
        std::fs::create_dir_all(p)?;
    }
    index.save(out)?;
    let per_sensor: BTreeMap<&str, usize> =
        vibwalk_core::ingest::SensorKind::ALL.iter().map(|&s| (s.name(), index.count(s))).collect();
    Ok(json!({
        "sessions": manifest.sessions.len(),
        "subjects": manifest.subjects.len(),
        "segments": per_sensor,
        "seconds": index.seconds,
        "skipped": index.skipped.len(),
    }))
}

pub fn featurize_index(index_path: &Path, kinds: &[FeatureKind], out: &Path) -> StageResult<Value> {
    let index = SegmentIndex::load(index_path)?;
    let fi = featurize(&index, kinds, out)?;
    let shapes: BTreeMap<&str, (usize, usize)> = kinds.iter().map(|k| (k.name(), k.layout().dims())).collect();
    Ok(json!({ "entries": fi.entries.len(), "shapes": shapes, "skipped": fi.skipped.len() }))
}

/// Materials present among the training-eligible entries, in taxonomy order.
pub fn label_space(entries: &[FeatureEntry], conditions: &[Condition]) -> Vec<Material> {
    let mut m: Vec<Material> = entries.iter().filter(|e| conditions.contains(&e.condition)).map(|e| e.material).collect();
    m.sort();
    m.dedup();
    m
}

fn label_names(materials: &[Material]) -> Vec<String> {
    materials.iter().map(|m| m.name().to_string()).collect()
}

fn kinds_for(modality: Modality, tko: bool) -> Vec<FeatureKind> {
    let mut k = vec![modality.feature_kind()];
    if tko {
        k.push(FeatureKind::Tko);
    }
    k
}

/// Everything the train stage leaves beside the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub labels: Vec<String>,
    pub modality: Modality,
    pub tko: bool,
    /// Feature-entry position of every dataset row.
    pub positions: Vec<usize>,
    pub plan: SplitPlan,
    pub report: CvReport,
}

/// Path of the cross-validation record stored next to a checkpoint.
pub fn cv_path(model: &Path) -> PathBuf {
    model.with_extension("cv.json")
}

fn training_set(fs: &FeatureSet, cfg: &ExperimentConfig) -> StageResult<(Vec<Material>, Dataset<f32>, Vec<usize>)> {
    let materials = label_space(&fs.index.entries, &cfg.train_conditions);
    if materials.len() < 2 {
        return Err(err(format!("need at least two materials to classify, found {}", materials.len())));
    }
    let (data, positions) = fs.dataset(cfg.modality.feature_kind(), cfg.tko, |e| {
        if cfg.train_conditions.contains(&e.condition) {
            materials.iter().position(|&m| m == e.material)
        } else {
            None
        }
    })?;
    Ok((materials, data, positions))
}

fn split_plan(cfg: &ExperimentConfig, fs: &FeatureSet, positions: &[usize]) -> StageResult<SplitPlan> {
    let plan = match cfg.split {
        SplitMode::WithinUser => within_user_folds(positions.len(), cfg.folds, cfg.seed)?,
        SplitMode::CrossUser => {
            let subjects: Vec<u32> = positions.iter().map(|&p| fs.index.entries[p].subject_id).collect();
            cross_user_folds(&subjects, cfg.group_size, cfg.seed)?
        }
    };
    Ok(match cfg.max_folds {
        Some(n) => plan.truncate(n),
        None => plan,
    })
}

/// Cross-validates on a feature directory and saves the fold-0 network to
/// `model` with its held-out positions in the checkpoint metadata.
pub fn train(features: &Path, cfg: &ExperimentConfig, model: &Path) -> StageResult<Value> {
    let fs = FeatureSet::load(features, &kinds_for(cfg.modality, cfg.tko))?;
    let (materials, data, positions) = training_set(&fs, cfg)?;
    let plan = split_plan(cfg, &fs, &positions)?;
    let net_cfg = cfg.network.build(cfg.modality.feature_kind(), materials.len(), cfg.tko);
    let train_cfg = vibwalk_core::model::TrainConfig { seed: cfg.train.seed.wrapping_add(cfg.seed), ..cfg.train.clone() };
    let (report, mut nets) = cross_validate(&net_cfg, &data, &plan, &train_cfg)?;
    let labels = label_names(&materials);
    let test_positions: Vec<usize> = plan.folds[0].test.iter().map(|&i| positions[i]).collect();
    let summary = json!({
        "mean_f1": report.mean_f1,
        "sd_f1": report.sd_f1,
        "mean_accuracy": report.mean_accuracy,
        "folds": report.folds.len(),
        "samples": data.len(),
    });
    if let Some(p) = model.parent() {
        std::fs::create_dir_all(p)?;
    }
    save_checkpoint(
        model,
        &mut nets[0],
        &labels,
        summary.clone(),
        json!({ "modality": cfg.modality, "tko": cfg.tko, "split": cfg.split, "fold": 0, "test_positions": test_positions }),
    )?;
    write_json(&cv_path(model), &TrainOutput { labels, modality: cfg.modality, tko: cfg.tko, positions, plan, report })?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub positions: Vec<usize>,
    pub truth: Vec<usize>,
    pub predictions: Vec<usize>,
    pub metrics: Metrics,
}

struct LoadedModel {
    ckpt: vibwalk_core::model::Checkpoint<f32>,
    modality: Modality,
    tko: bool,
    held_out: Option<Vec<usize>>,
}

fn load_model(path: &Path) -> StageResult<LoadedModel> {
    let ckpt = load_checkpoint::<f32>(path)?;
    let meta = &ckpt.header.meta;
    let modality: Modality = serde_json::from_value(meta["modality"].clone()).map_err(|_| err("checkpoint has no modality"))?;
    let tko = meta["tko"].as_bool().unwrap_or(false);
    let held_out = serde_json::from_value(meta["test_positions"].clone()).ok();
    Ok(LoadedModel { ckpt, modality, tko, held_out })
}

/// Rows of `fs` at `positions` (or every row when `None`) that satisfy
/// `keep` and carry one of the model's labels.
fn labelled_rows(
    fs: &FeatureSet,
    model: &LoadedModel,
    positions: Option<&[usize]>,
    keep: impl Fn(&FeatureEntry) -> bool,
) -> StageResult<(Dataset<f32>, Vec<usize>)> {
    let wanted: Option<HashSet<(usize, usize)>> =
        positions.map(|p| p.iter().map(|&i| (fs.index.entries[i].session, fs.index.entries[i].unit)).collect());
    let labels = &model.ckpt.header.labels;
    Ok(fs.dataset(model.modality.feature_kind(), model.tko, |e| {
        if wanted.as_ref().is_some_and(|w| !w.contains(&(e.session, e.unit))) || !keep(e) {
            return None;
        }
        labels.iter().position(|l| l == e.material.name())
    })?)
}

/// Scores a checkpoint on its held-out rows, or on every row of `features`
/// when the checkpoint records none.
pub fn evaluate_checkpoint(model: &Path, features: &Path) -> StageResult<EvalReport> {
    let m = load_model(model)?;
    let fs = FeatureSet::load(features, &kinds_for(m.modality, m.tko))?;
    let positions = m.held_out.clone();
    if let Some(p) = &positions {
        if p.iter().any(|&i| i >= fs.len()) {
            return Err(err("checkpoint held-out positions exceed the feature directory"));
        }
    }
    let (data, rows) = labelled_rows(&fs, &m, positions.as_deref(), |_| true)?;
    let mut net = m.ckpt.network.clone();
    let idx: Vec<usize> = (0..data.len()).collect();
    let predictions = predict(&mut net, &data, &idx, 64)?;
    let metrics = Metrics::evaluate(&data.labels, &predictions, m.ckpt.header.labels.len())?;
    Ok(EvalReport { labels: m.ckpt.header.labels.clone(), positions: rows, truth: data.labels.clone(), predictions, metrics })
}

pub fn eval(model: &Path, features: &Path, out: &Path) -> StageResult<Value> {
    let r = evaluate_checkpoint(model, features)?;
    write_json(out, &r)?;
    Ok(json!({ "accuracy": r.metrics.accuracy, "macro_f1": r.metrics.macro_f1, "n": r.metrics.n }))
}

fn variant_name(v: BandwidthVariant) -> &'static str {
    match v {
        BandwidthVariant::Literal => "literal",
        BandwidthVariant::Conventional => "conventional",
    }
}

/// Runs one analysis and writes `<name>.json` and `<name>.txt` under `out`.
pub fn analyze(which: Analysis, features: &Path, model: &Path, cfg: &ExperimentConfig, out: &Path) -> StageResult<Value> {
    std::fs::create_dir_all(out)?;
    match which {
        Analysis::Grain => {
            let fi = vibwalk_core::pipeline::FeatureIndex::load(features)?;
            let index = build_index(&load_manifest(&fi.manifest)?, &fi.manifest);
            let mut res = serde_json::Map::new();
            for v in cfg.grain_variants() {
                let r = grain_from_index(&index, v)?;
                write_report(out, &format!("grain_{}", variant_name(v)), &r)?;
                res.insert(
                    variant_name(v).into(),
                    json!({ "centroid_r": r.log_fit.centroid.r_value, "bandwidth_r": r.log_fit.bandwidth.r_value }),
                );
            }
            Ok(Value::Object(res))
        }
        Analysis::Wetdry => {
            let fs = FeatureSet::load(features, &kinds_for(cfg.modality, cfg.tko))?;
            let net = cfg.network.build(cfg.modality.feature_kind(), 12, cfg.tko);
            let r = wet_dry_eval(&fs, cfg.modality, cfg.tko, &net, &cfg.train, cfg.seed)?;
            write_report(out, "wetdry", &r)?;
            Ok(json!({ "accuracy": r.metrics.accuracy, "condition_accuracy": r.condition_metrics.accuracy }))
        }
        Analysis::Noise => {
            let m = load_model(model)?;
            let fs = FeatureSet::load(features, &kinds_for(m.modality, m.tko))?;
            let (clean, _) = labelled_rows(&fs, &m, m.held_out.as_deref(), |e| e.condition != Condition::Noisy)?;
            let (noisy, _) = labelled_rows(&fs, &m, None, |e| e.condition == Condition::Noisy)?;
            if noisy.is_empty() {
                return Err(err("no noisy-condition samples for the model's labels"));
            }
            let r = noise_eval(&m.ckpt.network, &clean, &noisy)?;
            write_report(out, "noise", &r)?;
            Ok(json!({ "clean_accuracy": r.clean.accuracy, "noisy_accuracy": r.noisy.accuracy, "delta": r.delta_accuracy }))
        }
        Analysis::Merge => {
            let t: TrainOutput = read_json(&cv_path(model))?;
            let merge: Vec<&str> = cfg.merge.iter().map(String::as_str).collect();
            let mut r = merge_and_eval(&t.report, &t.labels, &merge)?;
            if cfg.merge_retrain {
                let fs = FeatureSet::load(features, &kinds_for(t.modality, t.tko))?;
                let rcfg = ExperimentConfig { modality: t.modality, tko: t.tko, ..cfg.clone() };
                let (materials, data, _) = training_set(&fs, &rcfg)?;
                if label_names(&materials) != t.labels {
                    return Err(err("feature directory labels differ from the trained model"));
                }
                let (map, names) = merge_map(&t.labels, &merge)?;
                let net = cfg.network.build(t.modality.feature_kind(), t.labels.len(), t.tko);
                let cv = retrain_merged(&data, &t.plan, &net, &cfg.train, &map, names.len())?;
                r.retrained = Some(CvSummary { mean_f1: cv.mean_f1, sd_f1: cv.sd_f1, mean_accuracy: cv.mean_accuracy });
            }
            write_report(out, "merge", &r)?;
            Ok(json!({ "baseline_accuracy": r.baseline.accuracy, "merged_accuracy": r.merged.accuracy }))
        }
    }
}

fn analysis_name(a: Analysis) -> &'static str {
    match a {
        Analysis::Grain => "grain",
        Analysis::Wetdry => "wetdry",
        Analysis::Noise => "noise",
        Analysis::Merge => "merge",
    }
}

pub fn analyze_all(features: &Path, model: &Path, cfg: &ExperimentConfig, out: &Path) -> StageResult<Value> {
    let mut res = serde_json::Map::new();
    for &a in &cfg.analyses {
        res.insert(analysis_name(a).into(), analyze(a, features, model, cfg, out)?);
    }
    Ok(Value::Object(res))
}

const METERS_PER_DEG: f64 = 111_195.0;

/// Lays held-out predictions along synthetic walks, one per client: rows are
/// ordered by session and second, client `i` takes every `n`-th session.
pub fn synthetic_tracks(eval: &EvalReport, entries: &[FeatureEntry], spec: &MapSpec) -> Vec<Vec<TrackRow>> {
    let mut rows: Vec<(usize, usize, &str)> =
        eval.positions.iter().zip(&eval.predictions).map(|(&p, &y)| (entries[p].session, entries[p].unit, eval.labels[y].as_str())).collect();
    rows.sort();
    let mut sessions: Vec<usize> = rows.iter().map(|r| r.0).collect();
    sessions.dedup();
    let (lat0, lon0) = spec.origin;
    let dlon = spec.speed_mps / (METERS_PER_DEG * lat0.to_radians().cos());
    (0..spec.n_clients)
        .map(|c| {
            rows.iter()
                .filter(|r| sessions.iter().position(|&s| s == r.0).unwrap() % spec.n_clients == c)
                .enumerate()
                .map(|(k, r)| TrackRow {
                    timestamp_ms: 1_700_000_000_000 + 1000 * k as i64,
                    lat: lat0,
                    lon: lon0 + dlon * k as f64,
                    label: r.2.to_string(),
                    confidence: None,
                })
                .collect()
        })
        .collect()
}

/// Submits synthetic client walks to a durable store in `out/store` and
/// writes `map.geojson` and `map.html`.
pub fn map(eval_path: &Path, features: &Path, spec: &MapSpec, out: &Path) -> StageResult<Value> {
    let eval: EvalReport = read_json(eval_path)?;
    let fi = vibwalk_core::pipeline::FeatureIndex::load(features)?;
    let tracks = synthetic_tracks(&eval, &fi.entries, spec);
    std::fs::create_dir_all(out.join("tracks"))?;
    let store = ReportStore::open(&out.join("store"), true)?;
    let mut sent = 0;
    for (i, track) in tracks.iter().enumerate() {
        if track.is_empty() {
            continue;
        }
        let id = format!("client-{i}");
        write_track(&out.join("tracks").join(format!("{id}.csv")), track)?;
        for r in client_reports(track, &id, i as f64 * spec.client_offset_deg) {
            store.submit_raw(&serde_json::to_vec(&r)?)?;
            sent += 1;
        }
    }
    let doc = build_map(&store.snapshot(), spec.smoothing_k, spec.radius_m)?;
    std::fs::write(out.join("map.geojson"), serde_json::to_vec(&doc)?)?;
    std::fs::write(out.join("map.html"), render_html(&doc, &HtmlOptions::default())?)?;
    Ok(json!({ "clients": tracks.iter().filter(|t| !t.is_empty()).count(), "reports": sent, "features": doc["features"].as_array().map_or(0, |f| f.len()) }))
}
