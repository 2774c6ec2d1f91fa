//! Collects geolocated ground-material reports from walking clients and
//! turns them into labelled trajectories, coverage polygons, GeoJSON and a
//! self-contained HTML map.

pub mod colors;
pub mod coverage;
pub mod fuse;
pub mod geojson;
pub mod html;
pub mod report;
pub mod server;
pub mod simulate;
pub mod store;

pub use colors::label_color;
pub use coverage::{coverage_polygons, CoveragePolygon};
pub use fuse::{fuse_trajectory, smooth_labels, TrackPoint, TrajectorySegment};
pub use geojson::{build_map, emit_geojson, validate};
pub use html::{render_html, HtmlOptions};
pub use report::{GroundReport, RawReport};
pub use server::{router, serve, AppState, MapOptions};
pub use store::{Ack, ReportStore};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    OutOfRangeCoordinate { lat: f64, lon: f64 },
    #[error("no input")]
    EmptyInput,
    #[error("document has no features")]
    EmptyDocument,
    #[error("track file: {0}")]
    BadTrack(String),
    #[error("http: {0}")]
    Http(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
