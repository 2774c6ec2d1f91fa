use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::colors::label_color;
use crate::coverage::{coverage_polygons, CoveragePolygon};
use crate::fuse::{fuse_trajectory, TrackPoint, TrajectorySegment};
use crate::report::GroundReport;
use crate::MappingError;

fn pos(p: &TrackPoint) -> Value {
    json!([p.lon, p.lat])
}

fn ring(r: &[(f64, f64)]) -> Value {
    Value::Array(r.iter().map(|&(lat, lon)| json!([lon, lat])).collect())
}

fn marker(kind: &str, s: &TrajectorySegment, p: &TrackPoint) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "Point", "coordinates": pos(p) },
        "properties": {
            "kind": kind,
            "client_id": s.client_id,
            "label": s.label.name(),
            "color": label_color(s.label),
            "timestamp_ms": p.timestamp_ms,
        },
    })
}

/// FeatureCollection: one LineString per segment, one Polygon per coverage
/// polygon, and start/end Point markers for each client's trajectory.
/// A single-point segment is written as a two-position LineString.
pub fn emit_geojson(segments: &[TrajectorySegment], polygons: &[CoveragePolygon]) -> Value {
    let mut features = Vec::new();
    for s in segments {
        let mut coords: Vec<Value> = s.points.iter().map(pos).collect();
        if coords.len() == 1 {
            coords.push(coords[0].clone());
        }
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "LineString", "coordinates": coords },
            "properties": {
                "kind": "segment",
                "client_id": s.client_id,
                "label": s.label.name(),
                "color": label_color(s.label),
                "start_ms": s.points.first().map(|p| p.timestamp_ms),
                "end_ms": s.points.last().map(|p| p.timestamp_ms),
            },
        }));
    }
    for p in polygons {
        let mut rings = vec![ring(&p.ring)];
        rings.extend(p.holes.iter().map(|h| ring(h)));
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": rings },
            "properties": { "kind": "coverage", "label": p.label.name(), "color": label_color(p.label) },
        }));
    }
    let mut by_client: BTreeMap<&str, (&TrajectorySegment, &TrajectorySegment)> = BTreeMap::new();
    for s in segments {
        by_client.entry(&s.client_id).and_modify(|e| e.1 = s).or_insert((s, s));
    }
    for (first, last) in by_client.values() {
        features.push(marker("start", first, first.points.first().unwrap()));
        features.push(marker("end", last, last.points.last().unwrap()));
    }
    json!({ "type": "FeatureCollection", "features": features })
}

/// Fuses every client's log and emits the combined document.
pub fn build_map(logs: &BTreeMap<String, Vec<GroundReport>>, smoothing_k: usize, radius_m: f64) -> Result<Value, MappingError> {
    let mut segments = Vec::new();
    let mut all = Vec::new();
    for reports in logs.values().filter(|r| !r.is_empty()) {
        segments.extend(fuse_trajectory(reports, smoothing_k)?);
        all.extend(reports.iter().cloned());
    }
    if all.is_empty() {
        return Err(MappingError::EmptyInput);
    }
    let polygons = coverage_polygons(&all, radius_m)?;
    Ok(emit_geojson(&segments, &polygons))
}

fn check_position(v: &Value) -> Result<(f64, f64), String> {
    let a = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| format!("position {v} is not [lon, lat]"))?;
    let (lon, lat) = (a[0].as_f64().ok_or("non-numeric lon")?, a[1].as_f64().ok_or("non-numeric lat")?);
    if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
        return Err(format!("position [{lon}, {lat}] out of range"));
    }
    Ok((lat, lon))
}

/// Structural checks beyond the GeoJSON grammar: ranges, closed and simple
/// polygon rings, counter-clockwise exteriors.
pub fn validate(doc: &Value) -> Result<(), String> {
    if doc["type"] != "FeatureCollection" {
        return Err("top level is not a FeatureCollection".into());
    }
    let features = doc["features"].as_array().ok_or("features is not an array")?;
    for (i, f) in features.iter().enumerate() {
        let ctx = |e: String| format!("feature {i}: {e}");
        if f["type"] != "Feature" || !f["properties"].is_object() {
            return Err(ctx("not a Feature with properties".into()));
        }
        let g = &f["geometry"];
        let coords = &g["coordinates"];
        match g["type"].as_str() {
            Some("Point") => {
                check_position(coords).map_err(ctx)?;
            }
            Some("LineString") => {
                let pts = coords.as_array().ok_or_else(|| ctx("coordinates not an array".into()))?;
                if pts.len() < 2 {
                    return Err(ctx("LineString needs two positions".into()));
                }
                for p in pts {
                    check_position(p).map_err(ctx)?;
                }
            }
            Some("Polygon") => {
                let rings = coords.as_array().filter(|r| !r.is_empty()).ok_or_else(|| ctx("Polygon without rings".into()))?;
                for (k, r) in rings.iter().enumerate() {
                    let ring: Vec<(f64, f64)> =
                        r.as_array().ok_or_else(|| ctx("ring not an array".into()))?.iter().map(check_position).collect::<Result<_, _>>().map_err(ctx)?;
                    if !crate::coverage::ring_is_simple(&ring) {
                        return Err(ctx(format!("ring {k} is not closed and simple")));
                    }
                    let ccw = crate::coverage::signed_area2(&ring) > 0.0;
                    if ccw != (k == 0) {
                        return Err(ctx(format!("ring {k} has the wrong orientation")));
                    }
                }
            }
            other => return Err(ctx(format!("unsupported geometry {other:?}"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use vibwalk_core::Material;

    fn seg(label: Material, pts: &[(f64, f64)]) -> TrajectorySegment {
        TrajectorySegment {
            client_id: "a".into(),
            label,
            points: pts.iter().enumerate().map(|(i, &(lat, lon))| TrackPoint { lat, lon, timestamp_ms: i as i64 }).collect(),
        }
    }

    #[test]
    fn five_features() {
        let s = [seg(Material::Grass, &[(1.0, 2.0), (1.1, 2.0)]), seg(Material::Stone, &[(1.1, 2.0), (1.2, 2.0)])];
        let p = CoveragePolygon { label: Material::Grass, ring: vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.0, 0.0)], holes: vec![] };
        let doc = emit_geojson(&s, &[p]);
        let f = doc["features"].as_array().unwrap();
        assert_eq!(f.len(), 5);
        let kinds: Vec<&str> = f.iter().map(|x| x["properties"]["kind"].as_str().unwrap()).collect();
        assert_eq!(kinds, ["segment", "segment", "coverage", "start", "end"]);
        assert_eq!(f[4]["geometry"]["coordinates"], json!([2.0, 1.2]));
    }

    #[test]
    fn coordinates_keep_precision() {
        let (lat, lon) = (39.123456789012, 116.987654321098);
        let doc = emit_geojson(&[seg(Material::Tile, &[(lat, lon)])], &[]);
        let text = serde_json::to_string(&doc).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        let c = &back["features"][0]["geometry"]["coordinates"][0];
        assert_eq!(c[0].as_f64().unwrap(), lon);
        assert_eq!(c[1].as_f64().unwrap(), lat);
        assert_eq!(back["features"][0]["geometry"]["coordinates"].as_array().unwrap().len(), 2);
    }
}
