//! Replays a GPS track with per-second material predictions as one or more
//! clients posting to a running server.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::RawReport;
use crate::store::Ack;
use crate::MappingError;

/// One row of a track file: `timestamp_ms,lat,lon,label[,confidence]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub timestamp_ms: i64,
    pub lat: f64,
    pub lon: f64,
    pub label: String,
    #[serde(default)]
    pub confidence: Option<f64>,
}

pub fn read_track(path: &Path) -> Result<Vec<TrackRow>, MappingError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MappingError::BadTrack(e.to_string()))?;
    let rows: Vec<TrackRow> = rdr.deserialize().collect::<Result<_, _>>().map_err(|e| MappingError::BadTrack(e.to_string()))?;
    if rows.is_empty() {
        return Err(MappingError::BadTrack(format!("{} has no rows", path.display())));
    }
    Ok(rows)
}

pub fn write_track(path: &Path, rows: &[TrackRow]) -> Result<(), MappingError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| MappingError::BadTrack(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| MappingError::BadTrack(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reports client `i` would send: the track shifted north by `i * offset_deg`.
pub fn client_reports(track: &[TrackRow], client_id: &str, offset_deg: f64) -> Vec<RawReport> {
    track
        .iter()
        .enumerate()
        .map(|(k, r)| RawReport {
            client_id: client_id.to_string(),
            seq: k as u64 + 1,
            timestamp_ms: r.timestamp_ms,
            lat: r.lat + offset_deg,
            lon: r.lon,
            label: r.label.clone(),
            confidence: r.confidence.unwrap_or(1.0),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRun {
    pub client_id: String,
    pub sent: usize,
    pub last_ack: Option<Ack>,
}

async fn post(client: &reqwest::Client, url: &str, r: &RawReport) -> Result<Ack, MappingError> {
    let mut last = String::new();
    for attempt in 0..5 {
        match client.post(url).json(r).send().await {
            Ok(resp) if resp.status().is_success() => return resp.json::<Ack>().await.map_err(|e| MappingError::Http(e.to_string())),
            Ok(resp) if resp.status().is_client_error() => {
                return Err(MappingError::Http(format!("seq {}: {}", r.seq, resp.text().await.unwrap_or_default())))
            }
            Ok(resp) => last = resp.status().to_string(),
            Err(e) => last = e.to_string(),
        }
        tokio::time::sleep(std::time::Duration::from_millis(20 << attempt)).await;
    }
    Err(MappingError::Http(format!("seq {}: giving up after retries: {last}", r.seq)))
}

/// Runs `n` clients concurrently; each posts its reports in seq order.
pub async fn simulate_clients(base_url: &str, n: usize, track: &[TrackRow], offset_deg: f64) -> Result<Vec<ClientRun>, MappingError> {
    let http = reqwest::Client::new();
    let url = format!("{}/v1/report", base_url.trim_end_matches('/'));
    let mut tasks = Vec::new();
    for i in 0..n {
        let id = format!("client-{}", i + 1);
        let reports = client_reports(track, &id, offset_deg * i as f64);
        let (http, url) = (http.clone(), url.clone());
        tasks.push(tokio::spawn(async move {
            let mut last = None;
            for r in &reports {
                last = Some(post(&http, &url, r).await?);
            }
            Ok::<_, MappingError>(ClientRun { client_id: id, sent: reports.len(), last_ack: last })
        }));
    }
    let mut out = Vec::new();
    for t in tasks {
        out.push(t.await.map_err(|e| MappingError::Http(e.to_string()))??);
    }
    Ok(out)
}
