use serde::{Deserialize, Serialize};
use vibwalk_core::Material;

use crate::report::GroundReport;
use crate::MappingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub lat: f64,
    pub lon: f64,
    pub timestamp_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub client_id: String,
    pub label: Material,
    pub points: Vec<TrackPoint>,
}

/// Centred sliding-window majority over `k` labels (truncated at the ends).
/// Ties keep the previous smoothed label, then the raw label, then the
/// earliest tied label in the window.
pub fn smooth_labels(labels: &[Material], k: usize) -> Vec<Material> {
    let k = k.max(1);
    let n = labels.len();
    let mut out: Vec<Material> = Vec::with_capacity(n);
    let mut counts = [0usize; 18];
    for i in 0..n {
        let lo = i.saturating_sub((k - 1) / 2);
        let hi = (i + k / 2 + 1).min(n);
        counts.iter_mut().for_each(|c| *c = 0);
        for m in &labels[lo..hi] {
            counts[m.index()] += 1;
        }
        let best = *counts.iter().max().unwrap();
        let tied = |m: Material| counts[m.index()] == best;
        let pick = match out.last() {
            Some(&prev) if tied(prev) => prev,
            _ if tied(labels[i]) => labels[i],
            _ => *labels[lo..hi].iter().find(|&&m| tied(m)).unwrap(),
        };
        out.push(pick);
    }
    out
}

/// Splits one client's time-ordered reports into runs of equal smoothed
/// label. Every segment after the first starts with the last point of the
/// one before it, so consecutive segments join up when drawn.
pub fn fuse_trajectory(reports: &[GroundReport], k: usize) -> Result<Vec<TrajectorySegment>, MappingError> {
    let first = reports.first().ok_or(MappingError::EmptyInput)?;
    let labels: Vec<Material> = reports.iter().map(|r| r.label).collect();
    let smooth = smooth_labels(&labels, k);
    let point = |r: &GroundReport| TrackPoint { lat: r.lat, lon: r.lon, timestamp_ms: r.timestamp_ms };
    let mut segs: Vec<TrajectorySegment> = Vec::new();
    for (r, &label) in reports.iter().zip(&smooth) {
        match segs.last_mut() {
            Some(s) if s.label == label => s.points.push(point(r)),
            prev => {
                let mut points = Vec::new();
                if let Some(p) = prev {
                    points.push(*p.points.last().unwrap());
                }
                points.push(point(r));
                segs.push(TrajectorySegment { client_id: first.client_id.clone(), label, points });
            }
        }
    }
    Ok(segs)
}
