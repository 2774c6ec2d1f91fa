//! Segment index to feature directory, and feature directory to training
//! data.
//!
//! A sample is one MIC second `j` of a session. It pairs with ACC window
//! `j / 2`, forefoot channel for even `j` and rearfoot for odd `j`, so every
//! ACC window of both channels is used exactly once. ACC-only kinds use the
//! same enumeration so sample counts agree across modalities.
//!
//! Directory layout: `index.json` plus one `<kind>.bin` per feature kind,
//! each a stream of tensor records aligned with `index.json` entries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{
    acc_mel_feature, acc_stft_feature, fuse, mic_mel_feature, read_tensor, tko_feature, write_tensor, DspError, FeatureKind,
    FeatureTensor, Layout,
};
use crate::ingest::{decode_recording, load_manifest, IngestError, SegmentIndex, SensorKind};
use crate::model::Dataset;
use crate::taxonomy::{Condition, Material};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("feature directory {dir}: {reason}")]
    BadFeatureDir { dir: String, reason: String },
    #[error("feature kind {0} not present in directory")]
    MissingKind(&'static str),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Mic,
    Acc,
    Fused,
}

impl Modality {
    pub fn feature_kind(self) -> FeatureKind {
        match self {
            Modality::Mic => FeatureKind::MicMel,
            Modality::Acc => FeatureKind::AccStft,
            Modality::Fused => FeatureKind::Fused,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Mic => "mic",
            Modality::Acc => "acc",
            Modality::Fused => "fused",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        match s {
            "mic" => Some(Modality::Mic),
            "acc" => Some(Modality::Acc),
            "fused" => Some(Modality::Fused),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub session: usize,
    pub subject_id: u32,
    pub material: Material,
    pub condition: Condition,
    pub plate: bool,
    /// MIC second within the session.
    pub unit: usize,
    pub acc_window: usize,
    pub acc_sensor: SensorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureIndex {
    pub kinds: Vec<FeatureKind>,
    pub entries: Vec<FeatureEntry>,
    pub manifest: PathBuf,
    pub skipped: Vec<String>,
}

impl FeatureIndex {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join("index.json");
        let f = File::open(&path).map_err(|e| PipelineError::BadFeatureDir { dir: dir.display().to_string(), reason: e.to_string() })?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

fn needs(kinds: &[FeatureKind]) -> (bool, bool) {
    let mic = kinds.iter().any(|k| matches!(k, FeatureKind::MicMel | FeatureKind::Fused));
    let acc = kinds.iter().any(|k| !matches!(k, FeatureKind::MicMel));
    (mic, acc)
}

fn per_unit(
    kinds: &[FeatureKind],
    mic: Option<&[f32]>,
    acc: Option<&[f32]>,
) -> Result<Vec<FeatureTensor<f32>>, DspError> {
    let mic_mel = match mic {
        Some(m) if kinds.iter().any(|k| matches!(k, FeatureKind::MicMel | FeatureKind::Fused)) => Some(mic_mel_feature(m)?),
        _ => None,
    };
    let acc_mel = match acc {
        Some(a) if kinds.iter().any(|k| matches!(k, FeatureKind::AccMel | FeatureKind::Fused)) => Some(acc_mel_feature(a)?),
        _ => None,
    };
    kinds
        .iter()
        .map(|k| match k {
            FeatureKind::MicMel => Ok(mic_mel.clone().expect("mic")),
            FeatureKind::AccMel => Ok(acc_mel.clone().expect("acc")),
            FeatureKind::AccStft => acc_stft_feature(acc.expect("acc")),
            FeatureKind::Tko => {
                let t = tko_feature(acc.expect("acc"))?;
                FeatureTensor::new(t.phi_smooth, 1, Layout::Tko.dims().1, Layout::Tko)
            }
            FeatureKind::Fused => fuse(mic_mel.as_ref().expect("mic"), acc_mel.as_ref().expect("acc")),
        })
        .collect()
}

/// Computes `kinds` for every sample of every session in the index.
pub fn featurize(index: &SegmentIndex, kinds: &[FeatureKind], out: &Path) -> Result<FeatureIndex, PipelineError> {
    let manifest = load_manifest(&index.manifest)?;
    std::fs::create_dir_all(out)?;
    let (need_mic, need_acc) = needs(kinds);
    let mut writers: Vec<BufWriter<File>> =
        kinds.iter().map(|k| File::create(out.join(format!("{}.bin", k.name()))).map(BufWriter::new)).collect::<Result<_, _>>()?;
    let mut entries = Vec::new();
    let mut skipped = index.skipped.clone();

    let mut sessions: Vec<usize> = index.segments.iter().map(|s| s.session).collect();
    sessions.dedup();
    for si in sessions {
        let session = &manifest.sessions[si];
        let load = |sensor: SensorKind| -> Option<Vec<f32>> {
            match decode_recording::<f32>(&manifest, session, sensor) {
                Ok(r) => Some(r.samples),
                Err(e) => {
                    log::warn!("session {si} {}: {e}", sensor.name());
                    None
                }
            }
        };
        let mic = if need_mic { load(SensorKind::Mic) } else { None };
        let fore = if need_acc { load(SensorKind::AccForefoot) } else { None };
        let rear = if need_acc { load(SensorKind::AccRearfoot) } else { None };
        if (need_mic && mic.is_none()) || (need_acc && (fore.is_none() || rear.is_none())) {
            skipped.push(format!("session {si}: required recordings unavailable"));
            continue;
        }
        let mic_win = SensorKind::Mic.nominal_rate() as usize;
        let acc_win = (SensorKind::AccForefoot.window_s() * SensorKind::AccForefoot.nominal_rate()) as usize;
        let n_acc = |x: &Option<Vec<f32>>| x.as_ref().map_or(usize::MAX, |v| v.len() / acc_win);
        let mut n_units = mic.as_ref().map_or(usize::MAX, |m| m.len() / mic_win);
        if need_acc {
            // unit j uses window j/2 of fore (even j) or rear (odd j)
            n_units = n_units.min(2 * n_acc(&fore).min(n_acc(&rear)));
        }
        let tensors: Vec<Vec<FeatureTensor<f32>>> = (0..n_units)
            .into_par_iter()
            .map(|j| {
                let m = mic.as_ref().map(|m| &m[j * mic_win..(j + 1) * mic_win]);
                let src = if j % 2 == 0 { &fore } else { &rear };
                let w = j / 2;
                let a = src.as_ref().map(|a| &a[w * acc_win..(w + 1) * acc_win]);
                per_unit(kinds, m, a)
            })
            .collect::<Result<_, _>>()?;
        for (j, ts) in tensors.iter().enumerate() {
            for (w, t) in writers.iter_mut().zip(ts) {
                write_tensor(w, t)?;
            }
            entries.push(FeatureEntry {
                session: si,
                subject_id: session.subject_id,
                material: session.material,
                condition: session.condition,
                plate: session.plate,
                unit: j,
                acc_window: j / 2,
                acc_sensor: if j % 2 == 0 { SensorKind::AccForefoot } else { SensorKind::AccRearfoot },
            });
        }
    }
    for mut w in writers {
        use std::io::Write;
        w.flush()?;
    }
    let fi = FeatureIndex { kinds: kinds.to_vec(), entries, manifest: index.manifest.clone(), skipped };
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("index.json"))?), &fi)?;
    Ok(fi)
}

/// A loaded feature directory.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub dir: PathBuf,
    pub index: FeatureIndex,
    pub tensors: BTreeMap<FeatureKind, Vec<f32>>,
}

impl FeatureSet {
    pub fn load(dir: &Path, kinds: &[FeatureKind]) -> Result<Self, PipelineError> {
        let index = FeatureIndex::load(dir)?;
        let mut tensors = BTreeMap::new();
        for &k in kinds {
            if !index.kinds.contains(&k) {
                return Err(PipelineError::MissingKind(k.name()));
            }
            let (rows, cols) = k.layout().dims();
            let mut r = BufReader::new(File::open(dir.join(format!("{}.bin", k.name())))?);
            let mut flat = Vec::with_capacity(index.entries.len() * rows * cols);
            while let Some(t) = read_tensor::<f32, _>(&mut r)? {
                if t.layout() != k.layout() {
                    return Err(PipelineError::BadFeatureDir { dir: dir.display().to_string(), reason: format!("{} holds {:?}", k.name(), t.layout()) });
                }
                flat.extend_from_slice(t.values());
            }
            if flat.len() != index.entries.len() * rows * cols {
                return Err(PipelineError::BadFeatureDir {
                    dir: dir.display().to_string(),
                    reason: format!("{} has {} records for {} entries", k.name(), flat.len() / (rows * cols), index.entries.len()),
                });
            }
            tensors.insert(k, flat);
        }
        Ok(FeatureSet { dir: dir.to_path_buf(), index, tensors })
    }

    pub fn len(&self) -> usize {
        self.index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.entries.is_empty()
    }

    /// Samples for which `label` returns a class, in entry order. Also
    /// returns the chosen entry positions.
    pub fn dataset(
        &self,
        kind: FeatureKind,
        tko: bool,
        label: impl Fn(&FeatureEntry) -> Option<usize>,
    ) -> Result<(Dataset<f32>, Vec<usize>), PipelineError> {
        let flat = self.tensors.get(&kind).ok_or(PipelineError::MissingKind(kind.name()))?;
        let (rows, cols) = kind.layout().dims();
        let flen = rows * cols;
        let aux_flat = if tko { Some(self.tensors.get(&FeatureKind::Tko).ok_or(PipelineError::MissingKind("tko"))?) } else { None };
        let alen = Layout::Tko.dims().1;
        let mut features = Vec::new();
        let mut aux = Vec::new();
        let mut labels = Vec::new();
        let mut chosen = Vec::new();
        for (i, e) in self.index.entries.iter().enumerate() {
            if let Some(y) = label(e) {
                features.extend_from_slice(&flat[i * flen..(i + 1) * flen]);
                if let Some(a) = aux_flat {
                    aux.extend_from_slice(&a[i * alen..(i + 1) * alen]);
                }
                labels.push(y);
                chosen.push(i);
            }
        }
        let mut ds = Dataset::new(features, flen, labels);
        if tko {
            ds = ds.with_aux(aux, alen);
        }
        Ok((ds, chosen))
    }

    pub fn entries_at(&self, positions: &[usize]) -> Vec<&FeatureEntry> {
        positions.iter().map(|&i| &self.index.entries[i]).collect()
    }
}

/// Labels samples by material index over the full 18-class taxonomy.
pub fn material_label(e: &FeatureEntry) -> Option<usize> {
    Some(e.material.index())
}
