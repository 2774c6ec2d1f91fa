use serde::{Deserialize, Serialize};
use vibwalk_core::Material;

use crate::MappingError;

/// One geolocated material prediction from a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundReport {
    pub client_id: String,
    pub seq: u64,
    pub timestamp_ms: i64,
    pub lat: f64,
    pub lon: f64,
    pub label: Material,
    pub confidence: f64,
}

/// Wire form before validation; the label is free text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawReport {
    pub client_id: String,
    pub seq: u64,
    pub timestamp_ms: i64,
    pub lat: f64,
    pub lon: f64,
    pub label: String,
    #[serde(default = "full_confidence")]
    pub confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

impl RawReport {
    pub fn parse(body: &[u8]) -> Result<Self, MappingError> {
        serde_json::from_slice(body).map_err(|e| MappingError::MalformedReport(e.to_string()))
    }

    pub fn validate(self) -> Result<GroundReport, MappingError> {
        if self.client_id.is_empty() || self.client_id.len() > 128 {
            return Err(MappingError::MalformedReport("client_id must be 1..=128 bytes".into()));
        }
        if !self.client_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.') {
            return Err(MappingError::MalformedReport("client_id may only contain [A-Za-z0-9._-]".into()));
        }
        if self.seq == 0 {
            return Err(MappingError::MalformedReport("seq starts at 1".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(MappingError::MalformedReport(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(MappingError::OutOfRangeCoordinate { lat: self.lat, lon: self.lon });
        }
        let label: Material = self.label.parse().map_err(|_| MappingError::UnknownLabel(self.label.clone()))?;
        Ok(GroundReport {
            client_id: self.client_id,
            seq: self.seq,
            timestamp_ms: self.timestamp_ms,
            lat: self.lat,
            lon: self.lon,
            label,
            confidence: self.confidence,
        })
    }
}

impl From<&GroundReport> for RawReport {
    fn from(r: &GroundReport) -> Self {
        RawReport {
            client_id: r.client_id.clone(),
            seq: r.seq,
            timestamp_ms: r.timestamp_ms,
            lat: r.lat,
            lon: r.lon,
            label: r.label.name().to_string(),
            confidence: r.confidence,
        }
    }
}
