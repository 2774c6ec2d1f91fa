use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::geojson::build_map;
use crate::html::{render_html, HtmlOptions};
use crate::store::ReportStore;
use crate::MappingError;

#[derive(Debug, Clone)]
pub struct MapOptions {
    pub smoothing_k: usize,
    pub radius_m: f64,
    pub html: HtmlOptions,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions { smoothing_k: 3, radius_m: 5.0, html: HtmlOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<ReportStore>,
    pub map: Arc<MapOptions>,
}

impl AppState {
    pub fn new(store: ReportStore, map: MapOptions) -> Self {
        AppState { store: Arc::new(store), map: Arc::new(map) }
    }
}

fn error(status: StatusCode, e: &MappingError) -> Response {
    (status, Json(json!({ "error": e.to_string() }))).into_response()
}

async fn submit(State(st): State<AppState>, body: Bytes) -> Response {
    let store = st.store.clone();
    let res = tokio::task::spawn_blocking(move || store.submit_raw(&body)).await;
    match res {
        Ok(Ok(ack)) => Json(ack).into_response(),
        Ok(Err(e @ (MappingError::MalformedReport(_) | MappingError::UnknownLabel(_) | MappingError::OutOfRangeCoordinate { .. }))) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, &e)
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, &e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, &MappingError::Http(e.to_string())),
    }
}

fn current_map(st: &AppState) -> Result<serde_json::Value, MappingError> {
    build_map(&st.store.snapshot(), st.map.smoothing_k, st.map.radius_m)
}

async fn geojson(State(st): State<AppState>) -> Response {
    match current_map(&st) {
        Ok(doc) => ([(header::CONTENT_TYPE, "application/geo+json")], doc.to_string()).into_response(),
        Err(MappingError::EmptyInput) => {
            ([(header::CONTENT_TYPE, "application/geo+json")], json!({"type": "FeatureCollection", "features": []}).to_string())
                .into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, &e),
    }
}

async fn html(State(st): State<AppState>) -> Response {
    match current_map(&st).and_then(|doc| render_html(&doc, &st.map.html)) {
        Ok(page) => ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], page).into_response(),
        Err(e @ (MappingError::EmptyInput | MappingError::EmptyDocument)) => error(StatusCode::NOT_FOUND, &e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, &e),
    }
}

async fn health(State(st): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "clients": st.store.client_ids().len() }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/report", post(submit))
        .route("/v1/map.geojson", get(geojson))
        .route("/v1/map.html", get(html))
        .route("/v1/health", get(health))
        .with_state(state)
}

/// Binds and serves in a background task; returns the bound address.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(state);
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    log::info!("listening on {local}");
    Ok((local, handle))
}
