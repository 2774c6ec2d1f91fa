//! Converts an externally released dataset tree into the canonical manifest
//! and `f32` sample files.
//!
//! Expected source layout: `<root>/<subject>/<material>[_<condition>]/<sensor>.{wav,csv}`
//! where `<subject>` contains the numeric subject id (`S03`, `user_3`, `3`),
//! `<material>` is any accepted material spelling and `<sensor>` is one of
//! `acc_fore`, `acc_rear`, `mic`. CSV files hold one sample per row (first
//! column) at `SourceLayout::csv_rate_hz`; WAV rates come from the header.
//! Every channel is resampled to its nominal rate. Failures skip the session.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use super::{write_manifest, write_samples, DatasetManifest, FileRef, IngestError, SensorKind, Session, SessionFiles};
use super::resample_polyphase;
use crate::taxonomy::{Condition, Material};

#[derive(Debug, Clone)]
pub struct SourceLayout {
    pub root: PathBuf,
    pub csv_rate_hz: u64,
}

#[derive(Debug, Default)]
pub struct AdapterReport {
    pub sessions: usize,
    pub skipped: Vec<String>,
}

fn parse_subject(name: &str) -> Option<u32> {
    let digits: String = name.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

fn parse_material_dir(name: &str) -> Option<(Material, Condition)> {
    let lower = name.to_ascii_lowercase();
    for (suffix, cond) in [("_wet", Condition::Wet), ("_noisy", Condition::Noisy), ("_dry", Condition::Dry)] {
        if let Some(stem) = lower.strip_suffix(suffix) {
            return stem.parse().ok().map(|m| (m, cond));
        }
    }
    lower.parse().ok().map(|m| (m, Condition::Dry))
}

fn read_source(path: &Path, csv_rate: u64) -> Result<(Vec<f32>, u64), String> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("wav") => {
            let mut reader = hound::WavReader::open(path).map_err(|e| e.to_string())?;
            let spec = reader.spec();
            let ch = spec.channels as usize;
            let samples: Vec<f32> = match spec.sample_format {
                hound::SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>(),
                hound::SampleFormat::Int => {
                    let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
                    reader
                        .samples::<i32>()
                        .map(|s| s.map(|v| v as f32 * scale))
                        .collect::<Result<_, _>>()
                }
            }
            .map_err(|e| e.to_string())?;
            // first channel only
            Ok((samples.into_iter().step_by(ch.max(1)).collect(), spec.sample_rate as u64))
        }
        Some("csv") => {
            let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
            let mut out = Vec::new();
            for line in text.lines() {
                let field = line.split([',', ';', '\t']).next().unwrap_or("").trim();
                if field.is_empty() {
                    continue;
                }
                match field.parse::<f32>() {
                    Ok(v) => out.push(v),
                    Err(_) if out.is_empty() => continue, // header row
                    Err(e) => return Err(format!("row {}: {e}", out.len() + 1)),
                }
            }
            Ok((out, csv_rate))
        }
        _ => Err("unsupported extension".into()),
    }
}

fn subdirs(p: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(p)
        .map(|rd| rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

/// Walks `layout.root`, writes canonical files under `out_dir` and a
/// `manifest.json` there.
pub fn adapt_dataset(layout: &SourceLayout, out_dir: &Path) -> Result<(DatasetManifest, AdapterReport), IngestError> {
    fs::create_dir_all(out_dir)?;
    let mut report = AdapterReport::default();
    let mut sessions = Vec::new();
    for subject_dir in subdirs(&layout.root) {
        let sname = subject_dir.file_name().unwrap().to_string_lossy().to_string();
        let Some(subject) = parse_subject(&sname) else {
            warn!("skipping {sname}: no subject id");
            report.skipped.push(sname);
            continue;
        };
        for mat_dir in subdirs(&subject_dir) {
            let mname = mat_dir.file_name().unwrap().to_string_lossy().to_string();
            let tag = format!("{sname}/{mname}");
            let Some((material, condition)) = parse_material_dir(&mname) else {
                warn!("skipping {tag}: unknown material");
                report.skipped.push(tag);
                continue;
            };
            match adapt_session(layout, &mat_dir, out_dir, subject, material, condition) {
                Ok(s) => sessions.push(s),
                Err(e) => {
                    warn!("skipping {tag}: {e}");
                    report.skipped.push(format!("{tag}: {e}"));
                }
            }
        }
    }
    if sessions.is_empty() {
        return Err(IngestError::MissingManifest(format!(
            "no usable sessions under {}",
            layout.root.display()
        )));
    }
    let mut subjects: Vec<u32> = sessions.iter().map(|s: &Session| s.subject_id).collect();
    subjects.sort_unstable();
    subjects.dedup();
    report.sessions = sessions.len();
    let manifest = DatasetManifest { root: out_dir.to_path_buf(), subjects, sessions };
    write_manifest(&manifest, &out_dir.join("manifest.json"))?;
    Ok((manifest, report))
}

fn adapt_session(
    layout: &SourceLayout,
    dir: &Path,
    out_dir: &Path,
    subject: u32,
    material: Material,
    condition: Condition,
) -> Result<Session, String> {
    let mut files = SessionFiles::default();
    let mut duration: Option<f64> = None;
    for sensor in SensorKind::ALL {
        let src = ["wav", "csv"]
            .iter()
            .map(|ext| dir.join(format!("{}.{ext}", sensor.name())))
            .find(|p| p.exists());
        let Some(src) = src else { continue };
        let (raw, rate) = read_source(&src, layout.csv_rate_hz)?;
        let target = sensor.nominal_rate() as u64;
        let samples = resample_polyphase(&raw, rate, target, 16);
        let secs = samples.len() as f64 / target as f64;
        // channels of one session may differ slightly in length; keep the shortest
        duration = Some(duration.map_or(secs, |d: f64| d.min(secs)));
        let rel = PathBuf::from(format!("s{subject}/{}_{}_{}.f32", material.name(), condition.name(), sensor.name()));
        fs::create_dir_all(out_dir.join(rel.parent().unwrap())).map_err(|e| e.to_string())?;
        write_samples(&out_dir.join(&rel), &samples).map_err(|e| e.to_string())?;
        files.set(sensor, FileRef::Path(rel));
    }
    let duration_s = duration.ok_or("no sensor files")?;
    let duration_s = duration_s.floor();
    if duration_s <= 0.0 {
        return Err("recording shorter than one second".into());
    }
    Ok(Session { subject_id: subject, material, condition, plate: true, duration_s, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{decode_recording, load_manifest};

    #[test]
    fn adapts_csv_and_wav_and_skips_bad_sessions() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let sess = src.path().join("S01/gravel-large_wet");
        fs::create_dir_all(&sess).unwrap();
        let csv: String = std::iter::once("value".to_string())
            .chain((0..2000).map(|i| format!("{}", (i as f32 * 0.1).sin())))
            .collect::<Vec<_>>()
            .join("\n");
        fs::write(sess.join("acc_fore.csv"), csv).unwrap();
        let spec = hound::WavSpec { channels: 1, sample_rate: 44100, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        let mut w = hound::WavWriter::create(sess.join("mic.wav"), spec).unwrap();
        for i in 0..(44100 * 2) {
            w.write_sample(((i as f32 * 0.05).sin() * 1000.0) as i16).unwrap();
        }
        w.finalize().unwrap();
        fs::create_dir_all(src.path().join("S02/steel")).unwrap();
        fs::create_dir_all(src.path().join("S02/tile")).unwrap(); // no files

        let layout = SourceLayout { root: src.path().to_path_buf(), csv_rate_hz: 1000 };
        let (manifest, report) = adapt_dataset(&layout, out.path()).unwrap();
        assert_eq!(report.sessions, 1);
        assert_eq!(report.skipped.len(), 2);
        let s = &manifest.sessions[0];
        assert_eq!((s.subject_id, s.material, s.condition), (1, Material::GravelLarge, Condition::Wet));
        assert_eq!(s.duration_s, 2.0);

        let reloaded = load_manifest(&out.path().join("manifest.json")).unwrap();
        let mic = decode_recording::<f32>(&reloaded, &reloaded.sessions[0], SensorKind::Mic).unwrap();
        assert_eq!(mic.len(), 96_000);
        let acc = decode_recording::<f32>(&reloaded, &reloaded.sessions[0], SensorKind::AccForefoot).unwrap();
        assert_eq!(acc.len(), 3200);
    }
}
