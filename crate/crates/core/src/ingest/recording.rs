use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DatasetManifest, IngestError, SensorKind, Session};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    pub session: Session,
    pub sensor: SensorKind,
    pub samples: Vec<T>,
    pub rate: f64,
}

impl<T: Scalar> Recording<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }
}

/// Reads one sensor channel of a session as headerless little-endian `f32`.
pub fn decode_recording<T: Scalar>(
    manifest: &DatasetManifest,
    session: &Session,
    sensor: SensorKind,
) -> Result<Recording<T>, IngestError> {
    let file = session.files.get(sensor).ok_or(IngestError::MissingFile(sensor))?;
    let nominal = sensor.nominal_rate();
    if let Some(declared) = file.declared_rate() {
        if (declared - nominal).abs() > 1e-9 {
            return Err(IngestError::RateMismatch { sensor, declared, nominal });
        }
    }
    let path = manifest.resolve(file);
    let bytes = fs::read(&path)?;
    let corrupt = |reason: String| IngestError::CorruptPayload {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() % 4 != 0 {
        return Err(corrupt(format!("{} bytes is not a whole number of f32 samples", bytes.len())));
    }
    let mut samples = Vec::with_capacity(bytes.len() / 4);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(corrupt(format!("non-finite sample at index {i}")));
        }
        samples.push(T::lit(v as f64));
    }
    let expected = (session.duration_s * nominal).round() as usize;
    if samples.len().abs_diff(expected) > sensor.length_tolerance() {
        return Err(corrupt(format!(
            "{} samples, expected {expected} for {} s at {nominal} Hz",
            samples.len(),
            session.duration_s
        )));
    }
    Ok(Recording {
        session: session.clone(),
        sensor,
        samples,
        rate: nominal,
    })
}

/// Writes samples in the canonical headerless little-endian `f32` layout.
pub fn write_samples<T: Scalar>(path: &Path, samples: &[T]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(samples.len() * 4);
    for s in samples {
        buf.extend_from_slice(&s.as_f32().to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    f.flush()
}
