use geo::{unary_union, Coord, LineString, Orient, Polygon};
use serde::{Deserialize, Serialize};
use vibwalk_core::Material;

use crate::report::GroundReport;
use crate::MappingError;

const EARTH_RADIUS_M: f64 = 6_371_008.8;
const SIDES: usize = 32;

/// Union of buffered report locations for one label. Rings are closed
/// `(lat, lon)` sequences; the exterior runs counter-clockwise and holes
/// clockwise (in lon/lat axes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePolygon {
    pub label: Material,
    pub ring: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holes: Vec<Vec<(f64, f64)>>,
}

/// Local equirectangular projection around a reference point, in metres.
#[derive(Debug, Clone, Copy)]
struct Local {
    lat0: f64,
    lon0: f64,
    cos0: f64,
}

impl Local {
    fn new(lat0: f64, lon0: f64) -> Self {
        Local { lat0, lon0, cos0: lat0.to_radians().cos() }
    }

    fn forward(&self, lat: f64, lon: f64) -> Coord<f64> {
        Coord {
            x: (lon - self.lon0).to_radians() * self.cos0 * EARTH_RADIUS_M,
            y: (lat - self.lat0).to_radians() * EARTH_RADIUS_M,
        }
    }

    fn inverse(&self, c: Coord<f64>) -> (f64, f64) {
        (self.lat0 + (c.y / EARTH_RADIUS_M).to_degrees(), self.lon0 + (c.x / (EARTH_RADIUS_M * self.cos0)).to_degrees())
    }
}

fn circle(centre: Coord<f64>, r: f64) -> Polygon<f64> {
    let mut pts: Vec<Coord<f64>> = (0..SIDES)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / SIDES as f64;
            Coord { x: centre.x + r * a.cos(), y: centre.y + r * a.sin() }
        })
        .collect();
    pts.push(pts[0]);
    Polygon::new(LineString::new(pts), vec![])
}

/// Buffers every report by `radius_m` (32-gon) and unions per label. Labels
/// come out in taxonomy order.
pub fn coverage_polygons(reports: &[GroundReport], radius_m: f64) -> Result<Vec<CoveragePolygon>, MappingError> {
    if reports.is_empty() {
        return Err(MappingError::EmptyInput);
    }
    let n = reports.len() as f64;
    let proj = Local::new(reports.iter().map(|r| r.lat).sum::<f64>() / n, reports.iter().map(|r| r.lon).sum::<f64>() / n);
    let to_ring = |ls: &LineString<f64>| ls.coords().map(|&c| proj.inverse(c)).collect::<Vec<_>>();
    let mut out = Vec::new();
    for label in Material::ALL {
        let discs: Vec<Polygon<f64>> =
            reports.iter().filter(|r| r.label == label).map(|r| circle(proj.forward(r.lat, r.lon), radius_m)).collect();
        if discs.is_empty() {
            continue;
        }
        let merged = unary_union(&discs).orient(geo::orient::Direction::Default);
        for p in merged.0 {
            out.push(CoveragePolygon { label, ring: to_ring(p.exterior()), holes: p.interiors().iter().map(to_ring).collect() });
        }
    }
    Ok(out)
}

/// Twice the signed area in lon/lat axes; positive for counter-clockwise.
pub fn signed_area2(ring: &[(f64, f64)]) -> f64 {
    ring.windows(2).map(|w| w[0].1 * w[1].0 - w[1].1 * w[0].0).sum()
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Closed, at least a triangle, and no two non-adjacent edges cross.
pub fn ring_is_simple(ring: &[(f64, f64)]) -> bool {
    if ring.len() < 4 || ring.first() != ring.last() {
        return false;
    }
    let m = ring.len() - 1;
    for i in 0..m {
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            if segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return false;
            }
        }
    }
    true
}
