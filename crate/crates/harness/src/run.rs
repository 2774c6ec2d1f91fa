//! Staged execution with content-hash caching.
//!
//! Each stage owns a fixed set of paths under the work directory and records
//! `stages/<stage>.json` once it completes: the cache key, a SHA-256 of every
//! output file and the stage's metrics. The key hashes the stage name, the
//! slice of the config the stage reads and the hashes of its input files. A
//! stage is skipped when its record carries the current key and every output
//! still hashes to the recorded value.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use vibwalk_core::ingest::load_manifest;

use crate::config::{ExperimentConfig, Stage};
use crate::stages::{self, StageError};
use crate::HarnessError;

const CACHE_VERSION: u32 = 1;

/// Fixed output locations under a work directory.
#[derive(Debug, Clone)]
pub struct WorkDir {
    pub root: PathBuf,
}

impl WorkDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        WorkDir { root: root.into() }
    }
    pub fn segments(&self) -> PathBuf {
        self.root.join("segments.json")
    }
    pub fn features(&self) -> PathBuf {
        self.root.join("features")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("train").join("model.vw")
    }
    pub fn eval(&self) -> PathBuf {
        self.root.join("eval").join("eval.json")
    }
    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis")
    }
    pub fn map(&self) -> PathBuf {
        self.root.join("map")
    }
    pub fn stage_record(&self, s: Stage) -> PathBuf {
        self.root.join("stages").join(format!("{}.json", s.name()))
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    /// Paths a stage writes; removed before the stage reruns.
    pub fn outputs(&self, s: Stage) -> Vec<PathBuf> {
        match s {
            Stage::Ingest => vec![self.segments()],
            Stage::Featurize => vec![self.features()],
            Stage::Train => vec![self.root.join("train")],
            Stage::Eval => vec![self.root.join("eval")],
            Stage::Analyze => vec![self.analysis()],
            Stage::Map => vec![self.map()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub key: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub metrics: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub cached: bool,
    pub key: String,
    pub outputs: BTreeMap<String, String>,
    pub metrics: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub stages: Vec<StageReport>,
    /// True when every stage was skipped.
    pub cached: bool,
}

impl ExperimentReport {
    pub fn stage(&self, s: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|r| r.stage == s)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            out += &format!("{:<10} {:<7} {}\n", s.stage.name(), if s.cached { "cached" } else { "ran" }, s.metrics);
        }
        out
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            collect_files(&e, out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// SHA-256 of every file under `paths`, keyed relative to `base`.
pub fn hash_paths(base: &Path, paths: &[PathBuf]) -> std::io::Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} does not exist", p.display())));
        }
        collect_files(p, &mut files)?;
    }
    files
        .into_iter()
        .map(|f| {
            let key = f.strip_prefix(base).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            Ok((key, sha256_file(&f)?))
        })
        .collect()
}

fn cache_key(stage: Stage, slice: &Value, inputs: &BTreeMap<String, String>) -> String {
    let doc = json!({ "version": CACHE_VERSION, "stage": stage, "config": slice, "inputs": inputs });
    hex::encode(Sha256::digest(serde_json::to_vec(&doc).expect("json value serializes")))
}

/// The part of the config a stage reads.
fn config_slice(cfg: &ExperimentConfig, s: Stage) -> Value {
    let training = || {
        json!({
            "modality": cfg.modality, "tko": cfg.tko, "train_conditions": cfg.train_conditions, "split": cfg.split,
            "folds": cfg.folds, "max_folds": cfg.max_folds, "group_size": cfg.group_size, "seed": cfg.seed,
            "network": cfg.network, "train": cfg.train,
        })
    };
    match s {
        Stage::Ingest => json!({}),
        Stage::Featurize => json!({ "kinds": cfg.feature_kinds() }),
        Stage::Train => training(),
        Stage::Eval => json!({}),
        Stage::Analyze => json!({
            "training": training(), "analyses": cfg.analyses, "grain_variants": cfg.grain_variants(),
            "merge": cfg.merge, "merge_retrain": cfg.merge_retrain,
        }),
        Stage::Map => json!({ "map": cfg.map }),
    }
}

fn failure(stage: Stage, source: impl Into<StageError>) -> HarnessError {
    HarnessError::StageFailure { stage: stage.name().into(), source: source.into() }
}

/// Input files of a stage: the dataset for ingest, upstream outputs otherwise.
fn stage_inputs(cfg: &ExperimentConfig, work: &WorkDir, s: Stage) -> Result<BTreeMap<String, String>, StageError> {
    if s == Stage::Ingest {
        let manifest = load_manifest(&cfg.manifest)?;
        let mut files = vec![cfg.manifest.clone()];
        for session in &manifest.sessions {
            for sensor in vibwalk_core::ingest::SensorKind::ALL {
                if let Some(f) = session.files.get(sensor) {
                    files.push(manifest.resolve(f));
                }
            }
        }
        files.sort();
        files.dedup();
        let mut out = BTreeMap::new();
        for f in files {
            let key = f.strip_prefix(&manifest.root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            out.insert(key, sha256_file(&f).map_err(|e| format!("{}: {e}", f.display()))?);
        }
        return Ok(out);
    }
    let mut paths = Vec::new();
    for &req in s.requires() {
        if !work.stage_record(req).exists() {
            return Err(format!("{} outputs missing; run the {} stage first", req.name(), req.name()).into());
        }
        paths.extend(work.outputs(req));
    }
    Ok(hash_paths(&work.root, &paths)?)
}

fn execute(cfg: &ExperimentConfig, work: &WorkDir, s: Stage) -> Result<Value, StageError> {
    match s {
        Stage::Ingest => stages::ingest(&cfg.manifest, &work.segments()),
        Stage::Featurize => stages::featurize_index(&work.segments(), &cfg.feature_kinds(), &work.features()),
        Stage::Train => stages::train(&work.features(), cfg, &work.model()),
        Stage::Eval => stages::eval(&work.model(), &work.features(), &work.eval()),
        Stage::Analyze => stages::analyze_all(&work.features(), &work.model(), cfg, &work.analysis()),
        Stage::Map => stages::map(&work.eval(), &work.features(), &cfg.map, &work.map()),
    }
}

fn read_record(path: &Path) -> Option<StageRecord> {
    serde_json::from_slice(&std::fs::read(path).ok()?).ok()
}

/// Writes via a temporary file and rename so a reader never sees a partial
/// record.
fn write_record(path: &Path, rec: &StageRecord) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path.parent().expect("record has a parent"))?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(rec)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn remove_outputs(work: &WorkDir, s: Stage) -> std::io::Result<()> {
    for p in work.outputs(s) {
        if p.is_dir() {
            std::fs::remove_dir_all(&p)?;
        } else if p.exists() {
            std::fs::remove_file(&p)?;
        }
    }
    Ok(())
}

/// Runs the configured stages in order.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let work = WorkDir::new(&cfg.work_dir);
    std::fs::create_dir_all(&work.root)?;
    let mut reports = Vec::new();
    for &s in &cfg.stages {
        let inputs = stage_inputs(cfg, &work, s).map_err(|e| failure(s, e))?;
        let key = cache_key(s, &config_slice(cfg, s), &inputs);
        let record_path = work.stage_record(s);
        if let Some(rec) = read_record(&record_path) {
            let current = hash_paths(&work.root, &work.outputs(s)).ok();
            if rec.key == key && current.as_ref() == Some(&rec.outputs) {
                log::info!("{}: cached", s.name());
                reports.push(StageReport { stage: s, cached: true, key, outputs: rec.outputs, metrics: rec.metrics });
                continue;
            }
        }
        log::info!("{}: running", s.name());
        // a stale record must not survive a failed rerun
        if record_path.exists() {
            std::fs::remove_file(&record_path)?;
        }
        remove_outputs(&work, s)?;
        let metrics = execute(cfg, &work, s).map_err(|e| failure(s, e))?;
        let outputs = hash_paths(&work.root, &work.outputs(s)).map_err(|e| failure(s, e))?;
        write_record(&record_path, &StageRecord { stage: s, key: key.clone(), inputs, outputs: outputs.clone(), metrics: metrics.clone() })?;
        reports.push(StageReport { stage: s, cached: false, key, outputs, metrics });
    }
    let report = ExperimentReport { name: cfg.name.clone(), cached: reports.iter().all(|r| r.cached), stages: reports };
    std::fs::write(work.report(), serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}
