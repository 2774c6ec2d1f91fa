use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IngestError, SensorKind};
use crate::taxonomy::{Condition, Material};

/// Reference to a sample file, either a bare path or a path with an explicit
/// sample-rate declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FileRef {
    Path(PathBuf),
    Declared { path: PathBuf, rate_hz: f64 },
}

impl FileRef {
    pub fn path(&self) -> &Path {
        match self {
            FileRef::Path(p) => p,
            FileRef::Declared { path, .. } => path,
        }
    }

    pub fn declared_rate(&self) -> Option<f64> {
        match self {
            FileRef::Path(_) => None,
            FileRef::Declared { rate_hz, .. } => Some(*rate_hz),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionFiles {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_fore: Option<FileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc_rear: Option<FileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mic: Option<FileRef>,
}

impl SessionFiles {
    pub fn get(&self, sensor: SensorKind) -> Option<&FileRef> {
        match sensor {
            SensorKind::AccForefoot => self.acc_fore.as_ref(),
            SensorKind::AccRearfoot => self.acc_rear.as_ref(),
            SensorKind::Mic => self.mic.as_ref(),
        }
    }

    pub fn set(&mut self, sensor: SensorKind, file: FileRef) {
        match sensor {
            SensorKind::AccForefoot => self.acc_fore = Some(file),
            SensorKind::AccRearfoot => self.acc_rear = Some(file),
            SensorKind::Mic => self.mic = Some(file),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub subject_id: u32,
    pub material: Material,
    #[serde(default = "default_condition")]
    pub condition: Condition,
    #[serde(default)]
    pub plate: bool,
    pub duration_s: f64,
    pub files: SessionFiles,
}

fn default_condition() -> Condition {
    Condition::Dry
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Directory that relative file references resolve against.
    pub root: PathBuf,
    pub subjects: Vec<u32>,
    pub sessions: Vec<Session>,
}

impl DatasetManifest {
    pub fn resolve(&self, file: &FileRef) -> PathBuf {
        let p = file.path();
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Total recorded seconds for a sensor across sessions that carry it.
    pub fn total_seconds(&self, sensor: SensorKind) -> f64 {
        self.sessions
            .iter()
            .filter(|s| s.files.get(sensor).is_some())
            .map(|s| s.duration_s)
            .sum()
    }
}

// Raw on-disk form; materials stay strings so unknown names surface as
// `UnknownMaterial` rather than a serde error.
#[derive(Serialize, Deserialize)]
struct RawManifest {
    #[serde(default)]
    subjects: Vec<u32>,
    #[serde(default)]
    sessions: Vec<RawSession>,
}

#[derive(Serialize, Deserialize)]
struct RawSession {
    subject_id: u32,
    material: String,
    #[serde(default = "default_condition")]
    condition: Condition,
    #[serde(default)]
    plate: bool,
    duration_s: f64,
    #[serde(default)]
    files: SessionFiles,
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    let text = fs::read_to_string(path)
        .map_err(|e| IngestError::MissingManifest(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(IngestError::MissingManifest(format!("{} is empty", path.display())));
    }
    let raw: RawManifest = serde_json::from_str(&text)?;
    if raw.sessions.is_empty() {
        return Err(IngestError::MissingManifest(format!(
            "{} lists zero sessions",
            path.display()
        )));
    }

    let mut seen = BTreeSet::new();
    let mut sessions = Vec::with_capacity(raw.sessions.len());
    for rs in raw.sessions {
        let material: Material = rs
            .material
            .parse()
            .map_err(|_| IngestError::UnknownMaterial(rs.material.clone()))?;
        if !(rs.duration_s > 0.0 && rs.duration_s.is_finite()) {
            return Err(IngestError::InvalidSession(format!(
                "subject {} / {material}: duration {} s",
                rs.subject_id, rs.duration_s
            )));
        }
        // plate sessions are a separate recording condition
        if !seen.insert((rs.subject_id, material, rs.condition, rs.plate)) {
            return Err(IngestError::DuplicateSession {
                subject: rs.subject_id,
                material,
                condition: rs.condition,
            });
        }
        sessions.push(Session {
            subject_id: rs.subject_id,
            material,
            condition: rs.condition,
            plate: rs.plate,
            duration_s: rs.duration_s,
            files: rs.files,
        });
    }

    let mut subjects: BTreeSet<u32> = raw.subjects.into_iter().collect();
    subjects.extend(sessions.iter().map(|s| s.subject_id));

    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(DatasetManifest {
        root,
        subjects: subjects.into_iter().collect(),
        sessions,
    })
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), IngestError> {
    let raw = RawManifest {
        subjects: manifest.subjects.clone(),
        sessions: manifest
            .sessions
            .iter()
            .map(|s| RawSession {
                subject_id: s.subject_id,
                material: s.material.name().to_string(),
                condition: s.condition,
                plate: s.plate,
                duration_s: s.duration_s,
                files: s.files.clone(),
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string_pretty(&raw)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("manifest.json");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn baseline_scale_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut sessions = Vec::new();
        for subject in 1..=31u32 {
            for m in Material::ALL {
                sessions.push(serde_json::json!({
                    "subject_id": subject,
                    "material": m.name(),
                    "condition": "dry",
                    "plate": true,
                    "duration_s": 100.0,
                    "files": {"mic": format!("s{subject}/{}_mic.f32", m.name())}
                }));
            }
        }
        let body = serde_json::json!({"subjects": (1..=31).collect::<Vec<_>>(), "sessions": sessions});
        let m = load_manifest(&write(dir.path(), &body.to_string())).unwrap();
        assert_eq!(m.sessions.len(), 558);
        assert_eq!(m.subjects.len(), 31);
        assert_eq!(m.total_seconds(SensorKind::Mic), 55_800.0);
    }

    #[test]
    fn empty_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_manifest(&write(dir.path(), "")).unwrap_err();
        assert!(matches!(err, IngestError::MissingManifest(_)));
        let err = load_manifest(&write(dir.path(), r#"{"subjects":[],"sessions":[]}"#)).unwrap_err();
        assert!(matches!(err, IngestError::MissingManifest(_)));
        let err = load_manifest(&dir.path().join("nope.json")).unwrap_err();
        assert!(matches!(err, IngestError::MissingManifest(_)));
    }

    #[test]
    fn unknown_material_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"sessions":[{"subject_id":1,"material":"steel","duration_s":100,"files":{}}]}"#;
        match load_manifest(&write(dir.path(), body)).unwrap_err() {
            IngestError::UnknownMaterial(name) => assert_eq!(name, "steel"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_session_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = r#"{"subject_id":2,"material":"sand","condition":"wet","duration_s":100,"files":{}}"#;
        let body = format!(r#"{{"sessions":[{s},{s}]}}"#);
        assert!(matches!(
            load_manifest(&write(dir.path(), &body)).unwrap_err(),
            IngestError::DuplicateSession { subject: 2, material: Material::Sand, condition: Condition::Wet }
        ));
    }

    #[test]
    fn declared_rate_file_ref() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"sessions":[{"subject_id":1,"material":"tile","duration_s":10,
            "files":{"acc_fore":{"path":"a.f32","rate_hz":44100},"mic":"m.f32"}}]}"#;
        let m = load_manifest(&write(dir.path(), body)).unwrap();
        let f = m.sessions[0].files.get(SensorKind::AccForefoot).unwrap();
        assert_eq!(f.declared_rate(), Some(44100.0));
        assert_eq!(m.resolve(f), dir.path().join("a.f32"));
        assert_eq!(m.sessions[0].condition, Condition::Dry);
    }
}
