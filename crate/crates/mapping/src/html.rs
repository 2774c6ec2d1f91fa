use serde_json::Value;
use vibwalk_core::Material;

use crate::MappingError;

#[derive(Debug, Clone, PartialEq)]
pub struct HtmlOptions {
    pub title: String,
    /// `{z}`, `{x}`, `{y}` are substituted per tile.
    pub tile_url: String,
    pub tile_attribution: String,
    pub zoom: u32,
}

impl Default for HtmlOptions {
    fn default() -> Self {
        HtmlOptions {
            title: "Ground material map".into(),
            tile_url: "https://server.arcgisonline.com/ArcGIS/rest/services/World_Imagery/MapServer/tile/{z}/{y}/{x}".into(),
            tile_attribution: "Imagery: Esri World Imagery".into(),
            zoom: 18,
        }
    }
}

fn first_coordinate(doc: &Value) -> Option<(f64, f64)> {
    let features = doc["features"].as_array()?;
    let pick = |f: &Value| -> Option<(f64, f64)> {
        let g = &f["geometry"];
        let c = match g["type"].as_str()? {
            "Point" => &g["coordinates"],
            "LineString" => &g["coordinates"][0],
            "Polygon" => &g["coordinates"][0][0],
            _ => return None,
        };
        Some((c[1].as_f64()?, c[0].as_f64()?))
    };
    features
        .iter()
        .find(|f| f["properties"]["kind"] == "segment")
        .and_then(pick)
        .or_else(|| features.iter().find_map(pick))
}

/// `(label, colour)` for every label present, in taxonomy order.
pub fn legend_entries(doc: &Value) -> Vec<(String, String)> {
    let features = doc["features"].as_array().map(Vec::as_slice).unwrap_or(&[]);
    Material::ALL
        .iter()
        .filter_map(|m| {
            features
                .iter()
                .find(|f| f["properties"]["label"] == m.name())
                .map(|f| (m.name().to_string(), f["properties"]["color"].as_str().unwrap_or("#000").to_string()))
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn js_string(s: &str) -> String {
    serde_json::to_string(s).unwrap().replace("</", "<\\/")
}

/// One HTML file with inline script and styles. Only map tiles are fetched
/// at view time.
pub fn render_html(doc: &Value, opts: &HtmlOptions) -> Result<String, MappingError> {
    let (lat, lon) = first_coordinate(doc).ok_or(MappingError::EmptyDocument)?;
    let legend: String = legend_entries(doc)
        .iter()
        .map(|(l, c)| {
            format!(
                "<div class=\"row\" data-label=\"{}\"><span class=\"swatch\" style=\"background:{}\"></span>{}</div>\n",
                escape(l),
                escape(c),
                escape(l)
            )
        })
        .collect();
    let data = serde_json::to_string(doc)?.replace("</", "<\\/");
    Ok(TEMPLATE
        .replace("@TITLE@", &escape(&opts.title))
        .replace("@LEGEND@", &legend)
        .replace("@ATTRIBUTION@", &escape(&opts.tile_attribution))
        .replace("@DATA@", &data)
        .replace("@TILE_URL@", &js_string(&opts.tile_url))
        .replace("@CENTER@", &format!("[{lat}, {lon}]"))
        .replace("@ZOOM@", &opts.zoom.to_string()))
}

const TEMPLATE: &str = r##"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>@TITLE@</title>
<style>
html, body { margin: 0; height: 100%; font: 13px sans-serif; }
#map { position: absolute; inset: 0; overflow: hidden; background: #223; cursor: grab; }
#tiles, #overlay { position: absolute; left: 0; top: 0; }
#tiles img { position: absolute; width: 256px; height: 256px; user-select: none; }
#overlay { pointer-events: none; }
#legend { position: absolute; right: 12px; top: 12px; background: rgba(255,255,255,.92); border-radius: 4px; padding: 6px 10px; box-shadow: 0 1px 4px rgba(0,0,0,.4); }
#legend .title { font-weight: bold; margin-bottom: 4px; cursor: move; }
#legend .row { display: flex; align-items: center; gap: 6px; line-height: 18px; }
#legend .swatch { width: 14px; height: 14px; border: 1px solid #333; display: inline-block; }
#zoom { position: absolute; left: 12px; top: 12px; display: flex; flex-direction: column; gap: 2px; }
#zoom button { width: 28px; height: 28px; font-size: 16px; }
#attribution { position: absolute; right: 4px; bottom: 2px; font-size: 11px; color: #eee; }
</style>
</head>
<body>
<div id="map"><div id="tiles"></div><svg id="overlay" xmlns="http://www.w3.org/2000/svg"></svg></div>
<div id="legend"><div class="title">Ground material</div>
@LEGEND@</div>
<div id="zoom"><button id="zoom-in">+</button><button id="zoom-out">&minus;</button></div>
<div id="attribution">@ATTRIBUTION@</div>
<script>
"use strict";
const DATA = @DATA@;
const TILE_URL = @TILE_URL@;
const CENTER = @CENTER@;
let zoom = @ZOOM@;
const map = document.getElementById("map");
const tiles = document.getElementById("tiles");
const overlay = document.getElementById("overlay");
const SVG = "http://www.w3.org/2000/svg";

function project(lat, lon, z) {
  const s = 256 * Math.pow(2, z);
  const r = lat * Math.PI / 180;
  return [(lon + 180) / 360 * s, (1 - Math.log(Math.tan(r) + 1 / Math.cos(r)) / Math.PI) / 2 * s];
}

let centre = project(CENTER[0], CENTER[1], zoom);

function origin() {
  return [centre[0] - map.clientWidth / 2, centre[1] - map.clientHeight / 2];
}

function drawTiles() {
  tiles.textContent = "";
  const [ox, oy] = origin();
  const n = Math.pow(2, zoom);
  for (let tx = Math.floor(ox / 256); tx * 256 < ox + map.clientWidth; tx++) {
    for (let ty = Math.floor(oy / 256); ty * 256 < oy + map.clientHeight; ty++) {
      if (ty < 0 || ty >= n) continue;
      const img = document.createElement("img");
      const wx = ((tx % n) + n) % n;
      img.src = TILE_URL.replace("{z}", zoom).replace("{x}", wx).replace("{y}", ty);
      img.style.left = (tx * 256 - ox) + "px";
      img.style.top = (ty * 256 - oy) + "px";
      img.draggable = false;
      tiles.appendChild(img);
    }
  }
}

function path(coords, close) {
  const [ox, oy] = origin();
  return coords.map((c, i) => {
    const p = project(c[1], c[0], zoom);
    return (i ? "L" : "M") + (p[0] - ox).toFixed(1) + " " + (p[1] - oy).toFixed(1);
  }).join("") + (close ? "Z" : "");
}

function drawFeatures() {
  overlay.textContent = "";
  overlay.setAttribute("width", map.clientWidth);
  overlay.setAttribute("height", map.clientHeight);
  const [ox, oy] = origin();
  const order = { coverage: 0, segment: 1, start: 2, end: 2 };
  const feats = DATA.features.slice().sort((a, b) => order[a.properties.kind] - order[b.properties.kind]);
  for (const f of feats) {
    const g = f.geometry, p = f.properties;
    let el;
    if (g.type === "Polygon") {
      el = document.createElementNS(SVG, "path");
      el.setAttribute("d", g.coordinates.map(r => path(r, true)).join(""));
      el.setAttribute("fill", p.color);
      el.setAttribute("fill-opacity", "0.35");
      el.setAttribute("fill-rule", "evenodd");
      el.setAttribute("stroke", p.color);
    } else if (g.type === "LineString") {
      el = document.createElementNS(SVG, "path");
      el.setAttribute("d", path(g.coordinates, false));
      el.setAttribute("fill", "none");
      el.setAttribute("stroke", p.color);
      el.setAttribute("stroke-width", "4");
      el.setAttribute("stroke-linecap", "round");
    } else if (g.type === "Point") {
      const q = project(g.coordinates[1], g.coordinates[0], zoom);
      el = document.createElementNS(SVG, "circle");
      el.setAttribute("cx", q[0] - ox);
      el.setAttribute("cy", q[1] - oy);
      el.setAttribute("r", "7");
      el.setAttribute("fill", p.kind === "start" ? "#ffffff" : "#000000");
      el.setAttribute("stroke", p.color);
      el.setAttribute("stroke-width", "3");
    }
    if (el) overlay.appendChild(el);
  }
}

function redraw() { drawTiles(); drawFeatures(); }

function setZoom(z, ax, ay) {
  z = Math.max(1, Math.min(22, z));
  if (z === zoom) return;
  const [ox, oy] = origin();
  const f = Math.pow(2, z - zoom);
  const px = ox + ax, py = oy + ay;
  centre = [px * f - ax + map.clientWidth / 2, py * f - ay + map.clientHeight / 2];
  zoom = z;
  redraw();
}

let drag = null;
map.addEventListener("mousedown", e => { drag = [e.clientX, e.clientY]; map.style.cursor = "grabbing"; });
window.addEventListener("mouseup", () => { drag = null; map.style.cursor = "grab"; });
window.addEventListener("mousemove", e => {
  if (!drag) return;
  centre = [centre[0] - (e.clientX - drag[0]), centre[1] - (e.clientY - drag[1])];
  drag = [e.clientX, e.clientY];
  redraw();
});
map.addEventListener("wheel", e => { e.preventDefault(); setZoom(zoom + (e.deltaY < 0 ? 1 : -1), e.clientX, e.clientY); }, { passive: false });
document.getElementById("zoom-in").onclick = () => setZoom(zoom + 1, map.clientWidth / 2, map.clientHeight / 2);
document.getElementById("zoom-out").onclick = () => setZoom(zoom - 1, map.clientWidth / 2, map.clientHeight / 2);
window.addEventListener("resize", redraw);

const legend = document.getElementById("legend");
let grab = null;
legend.querySelector(".title").addEventListener("mousedown", e => {
  const r = legend.getBoundingClientRect();
  grab = [e.clientX - r.left, e.clientY - r.top];
  e.stopPropagation();
  e.preventDefault();
});
window.addEventListener("mousemove", e => {
  if (!grab) return;
  legend.style.right = "auto";
  legend.style.left = (e.clientX - grab[0]) + "px";
  legend.style.top = (e.clientY - grab[1]) + "px";
});
window.addEventListener("mouseup", () => { grab = null; });

redraw();
</script>
</body>
</html>
"##;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colors::label_color;
    use crate::fuse::{TrackPoint, TrajectorySegment};
    use crate::geojson::emit_geojson;

    fn doc_with(labels: &[Material]) -> Value {
        let segs: Vec<TrajectorySegment> = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| TrajectorySegment {
                client_id: "a".into(),
                label,
                points: vec![TrackPoint { lat: 40.0 + i as f64 * 1e-4, lon: 116.0, timestamp_ms: 0 }],
            })
            .collect();
        emit_geojson(&segs, &[])
    }

    #[test]
    fn full_legend() {
        let doc = doc_with(&Material::ALL);
        let html = render_html(&doc, &HtmlOptions::default()).unwrap();
        assert_eq!(html.matches("class=\"row\"").count(), 18);
        for m in Material::ALL {
            assert!(html.contains(&format!("data-label=\"{}\"><span class=\"swatch\" style=\"background:{}\"", m.name(), label_color(m))));
        }
    }

    #[test]
    fn centred_on_first_coordinate() {
        let html = render_html(&doc_with(&[Material::Grass]), &HtmlOptions::default()).unwrap();
        assert!(html.contains("const CENTER = [40, 116];"));
    }

    #[test]
    fn no_external_resources() {
        let html = render_html(&doc_with(&[Material::Grass, Material::Stone]), &HtmlOptions::default()).unwrap();
        assert!(!html.contains("<script src"));
        assert!(!html.contains("<link"));
        assert!(!html.contains("@import"));
        assert_eq!(html.matches("<script").count(), 1);
    }

    #[test]
    fn empty_document() {
        let doc = serde_json::json!({"type": "FeatureCollection", "features": []});
        assert!(matches!(render_html(&doc, &HtmlOptions::default()), Err(MappingError::EmptyDocument)));
    }

    #[test]
    fn data_cannot_close_the_script() {
        let mut doc = doc_with(&[Material::Grass]);
        doc["features"][0]["properties"]["client_id"] = Value::String("</script><b>".into());
        let html = render_html(&doc, &HtmlOptions::default()).unwrap();
        assert_eq!(html.matches("</script>").count(), 1);
    }
}
