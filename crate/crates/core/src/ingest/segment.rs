use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{decode_recording, DatasetManifest, IngestError, Recording, SensorKind};
use crate::scalar::Scalar;
use crate::taxonomy::{Condition, Material};

/// A fixed-length window cut from a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub subject_id: u32,
    pub material: Material,
    pub condition: Condition,
    pub plate: bool,
    pub sensor: SensorKind,
    pub start_index: usize,
    pub window_s: f64,
    pub samples: Vec<T>,
}

/// Number of full windows: `(N - W) / S + 1`, or zero when `N < W`.
pub fn segment_count(len: usize, window: usize, stride: usize) -> usize {
    if len < window || window == 0 || stride == 0 {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// Cuts a recording into windows of `window_s` seconds every `stride_s`
/// seconds. The trailing partial window is dropped.
pub fn segment<T: Scalar>(
    recording: &Recording<T>,
    window_s: f64,
    stride_s: f64,
) -> Result<Vec<Segment<T>>, IngestError> {
    if !(window_s > 0.0 && stride_s > 0.0) {
        return Err(IngestError::InvalidWindow(format!("window {window_s} s, stride {stride_s} s")));
    }
    let window = (window_s * recording.rate).round() as usize;
    let stride = (stride_s * recording.rate).round() as usize;
    if window == 0 || stride == 0 {
        return Err(IngestError::InvalidWindow(format!(
            "window/stride round to zero samples at {} Hz",
            recording.rate
        )));
    }
    let n = recording.samples.len();
    if n < window {
        return Err(IngestError::TooShort { len: n, window });
    }
    let s = &recording.session;
    Ok((0..segment_count(n, window, stride))
        .map(|i| {
            let start = i * stride;
            Segment {
                subject_id: s.subject_id,
                material: s.material,
                condition: s.condition,
                plate: s.plate,
                sensor: recording.sensor,
                start_index: start,
                window_s,
                samples: recording.samples[start..start + window].to_vec(),
            }
        })
        .collect())
}

/// Metadata for one segment in a persisted segment index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub id: usize,
    /// Position of the session in the manifest.
    pub session: usize,
    pub subject_id: u32,
    pub material: Material,
    pub condition: Condition,
    pub plate: bool,
    pub sensor: SensorKind,
    pub start_index: usize,
    pub len: usize,
}

/// Validated list of segments produced by `vibmap ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentIndex {
    pub manifest: PathBuf,
    pub segments: Vec<SegmentEntry>,
    /// Seconds per sensor as declared in the manifest.
    pub seconds: BTreeMap<String, f64>,
    pub skipped: Vec<String>,
}

impl SegmentIndex {
    pub fn count(&self, sensor: SensorKind) -> usize {
        self.segments.iter().filter(|s| s.sensor == sensor).count()
    }
}

/// Decodes every recording in the manifest and lists its windows. Sessions
/// whose files fail validation are skipped and reported, not fatal.
pub fn build_index(manifest: &DatasetManifest, manifest_path: &Path) -> SegmentIndex {
    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for (si, session) in manifest.sessions.iter().enumerate() {
        for sensor in SensorKind::ALL {
            if session.files.get(sensor).is_none() {
                continue;
            }
            let rec = match decode_recording::<f32>(manifest, session, sensor) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("session {si} {}: {e}", sensor.name());
                    skipped.push(format!("session {si} ({} {} subject {}) {}: {e}", session.material, session.condition.name(), session.subject_id, sensor.name()));
                    continue;
                }
            };
            let window = (sensor.window_s() * rec.rate).round() as usize;
            for k in 0..segment_count(rec.samples.len(), window, window) {
                segments.push(SegmentEntry {
                    id: segments.len(),
                    session: si,
                    subject_id: session.subject_id,
                    material: session.material,
                    condition: session.condition,
                    plate: session.plate,
                    sensor,
                    start_index: k * window,
                    len: window,
                });
            }
        }
    }
    let seconds = SensorKind::ALL.iter().map(|&s| (s.name().to_string(), manifest.total_seconds(s))).collect();
    SegmentIndex { manifest: manifest_path.to_path_buf(), segments, seconds, skipped }
}

impl SegmentIndex {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub per_material: BTreeMap<Material, usize>,
    /// (max - min) / max over materials that appear.
    pub max_relative_spread: f64,
}

impl BalanceReport {
    pub fn is_balanced(&self, tolerance: f64) -> bool {
        self.max_relative_spread < tolerance
    }
}

pub fn balance_report<'a>(materials: impl IntoIterator<Item = &'a Material>) -> BalanceReport {
    let mut per_material = BTreeMap::new();
    for m in materials {
        *per_material.entry(*m).or_insert(0usize) += 1;
    }
    let max = per_material.values().copied().max().unwrap_or(0);
    let min = per_material.values().copied().min().unwrap_or(0);
    let max_relative_spread = if max == 0 { 0.0 } else { (max - min) as f64 / max as f64 };
    BalanceReport { per_material, max_relative_spread }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Session, SessionFiles};
    use proptest::prelude::*;

    fn recording(sensor: SensorKind, seconds: f64) -> Recording<f32> {
        let rate = sensor.nominal_rate();
        let n = (seconds * rate).round() as usize;
        Recording {
            session: Session {
                subject_id: 7,
                material: Material::Asphalt,
                condition: Condition::Dry,
                plate: true,
                duration_s: seconds,
                files: SessionFiles::default(),
            },
            sensor,
            samples: (0..n).map(|i| i as f32).collect(),
            rate,
        }
    }

    #[test]
    fn acc_baseline_segments() {
        let segs = segment(&recording(SensorKind::AccForefoot, 100.0), 2.0, 2.0).unwrap();
        assert_eq!(segs.len(), 50);
        assert!(segs.iter().all(|s| s.samples.len() == 3200));
        // non-overlapping and contiguous
        for w in segs.windows(2) {
            assert_eq!(w[1].start_index, w[0].start_index + 3200);
        }
        assert_eq!(segs[1].samples[0], 3200.0);
    }

    #[test]
    fn mic_baseline_segments() {
        let segs = segment(&recording(SensorKind::Mic, 100.0), 1.0, 1.0).unwrap();
        assert_eq!(segs.len(), 100);
        assert!(segs.iter().all(|s| s.samples.len() == 48000));
    }

    #[test]
    fn too_short_and_trailing_partial() {
        let r = recording(SensorKind::AccRearfoot, 1.5);
        assert!(matches!(segment(&r, 2.0, 2.0), Err(IngestError::TooShort { len: 2400, window: 3200 })));
        let segs = segment(&recording(SensorKind::AccRearfoot, 5.0), 2.0, 2.0).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segment(&r, 0.0, 1.0).is_err());
    }

    #[test]
    fn baseline_totals() {
        // 31 subjects x 18 materials x 100 s; two ACC channels
        let sessions = 31 * 18;
        let acc_per_session = segment_count(160_000, 3200, 3200) * 2;
        let mic_per_session = segment_count(4_800_000, 48_000, 48_000);
        assert_eq!(sessions * acc_per_session, 111_600 / 2);
        assert_eq!(sessions * mic_per_session, 55_800);
    }

    #[test]
    fn balance() {
        let mats = vec![Material::Sand; 50]
            .into_iter()
            .chain(vec![Material::Tile; 49])
            .collect::<Vec<_>>();
        let r = balance_report(&mats);
        assert!(r.is_balanced(0.05));
        assert_eq!(r.per_material[&Material::Tile], 49);
    }

    proptest! {
        #[test]
        fn count_formula(n in 1usize..5000, w in 1usize..600, s in 1usize..600) {
            let expected = if n >= w { (n - w) / s + 1 } else { 0 };
            let brute = (0..).map(|i| i * s).take_while(|start| start + w <= n).count();
            prop_assert_eq!(segment_count(n, w, s), expected);
            prop_assert_eq!(brute, expected);
        }
    }
}
