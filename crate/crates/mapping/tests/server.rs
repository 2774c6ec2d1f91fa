use std::collections::BTreeMap;
use std::net::SocketAddr;

use vibwalk_mapping::simulate::{simulate_clients, TrackRow};
use vibwalk_mapping::{build_map, serve, validate, AppState, MapOptions, RawReport, ReportStore};

fn track(n: usize) -> Vec<TrackRow> {
    let labels = ["asphalt", "stone", "grass", "concrete", "slab"];
    (0..n)
        .map(|i| TrackRow {
            timestamp_ms: 1_700_000_000_000 + i as i64 * 1000,
            lat: 39.9990 + i as f64 * 1.2e-5,
            lon: 116.3260 + (i as f64 * 0.05).sin() * 1e-4,
            label: labels[(i / 37) % labels.len()].to_string(),
            confidence: Some(0.9),
        })
        .collect()
}

async fn start(store: ReportStore) -> SocketAddr {
    let (addr, _) = serve("127.0.0.1:0".parse().unwrap(), AppState::new(store, MapOptions::default())).await.unwrap();
    addr
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_clients_and_identical_replays() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start(ReportStore::open(&dir.path().join("a"), true).unwrap()).await;
    let runs = simulate_clients(&format!("http://{addr}"), 2, &track(1000), 3e-5).await.unwrap();
    assert_eq!(runs.len(), 2);
    for r in &runs {
        assert_eq!(r.sent, 1000);
        assert_eq!(r.last_ack.unwrap().high_seq, 1000);
    }

    let store = ReportStore::open(&dir.path().join("a"), false).unwrap();
    let snap = store.snapshot();
    assert_eq!(snap.len(), 2);
    for (id, reports) in &snap {
        let seqs: Vec<u64> = store.append_order(id).iter().map(|r| r.seq).collect();
        assert_eq!(seqs, (1..=1000).collect::<Vec<_>>(), "{id} log out of order");
        assert_eq!(reports.len(), 1000);
    }

    // a second server fed the same logs
    let doc_a = reqwest::get(format!("http://{addr}/v1/map.geojson")).await.unwrap().text().await.unwrap();
    let copy = dir.path().join("b");
    std::fs::create_dir_all(&copy).unwrap();
    for e in std::fs::read_dir(dir.path().join("a")).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), copy.join(e.file_name())).unwrap();
    }
    let addr_b = start(ReportStore::open(&copy, false).unwrap()).await;
    let doc_b = reqwest::get(format!("http://{addr_b}/v1/map.geojson")).await.unwrap().text().await.unwrap();
    assert_eq!(doc_a, doc_b);

    let parsed: geojson::GeoJson = doc_a.parse().unwrap();
    assert!(matches!(parsed, geojson::GeoJson::FeatureCollection(_)));
    validate(&serde_json::from_str(&doc_a).unwrap()).unwrap();

    let html = reqwest::get(format!("http://{addr}/v1/map.html")).await.unwrap();
    assert!(html.status().is_success());
    let health: serde_json::Value = reqwest::get(format!("http://{addr}/v1/health")).await.unwrap().json().await.unwrap();
    assert_eq!(health["clients"], 2);
}

#[tokio::test]
async fn protocol_errors_and_resends() {
    let addr = start(ReportStore::in_memory()).await;
    let url = format!("http://{addr}/v1/report");
    let http = reqwest::Client::new();
    let good = RawReport { client_id: "a".into(), seq: 1, timestamp_ms: 0, lat: 1.0, lon: 2.0, label: "grass".into(), confidence: 1.0 };
    let ack: serde_json::Value = http.post(&url).json(&good).send().await.unwrap().json().await.unwrap();
    assert_eq!(ack, serde_json::json!({"stored": true, "high_seq": 1}));
    let ack: serde_json::Value = http.post(&url).json(&good).send().await.unwrap().json().await.unwrap();
    assert_eq!(ack, serde_json::json!({"stored": false, "high_seq": 1}));

    for bad in [
        serde_json::json!({"client_id": "a"}),
        serde_json::to_value(RawReport { label: "lava".into(), seq: 2, ..good.clone() }).unwrap(),
        serde_json::to_value(RawReport { lat: 100.0, seq: 2, ..good.clone() }).unwrap(),
    ] {
        let resp = http.post(&url).json(&bad).send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 422);
    }
    let empty = ReportStore::in_memory();
    assert!(build_map(&BTreeMap::new(), 3, 5.0).is_err());
    assert!(empty.snapshot().is_empty());
}
