use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn vibmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vibmap")).args(args).output().expect("spawn vibmap")
}

fn ok(args: &[&str]) -> String {
    let out = vibmap(args);
    assert!(out.status.success(), "vibmap {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn command_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = ok(&["fixtures", "--out", p(&d.join("data")), "--subjects", "2", "--materials", "asphalt,slab,concrete,grass", "--seconds", "3", "--seed", "4"]);
    assert!(manifest.trim().ends_with("manifest.json"));
    let ingest: serde_json::Value = serde_json::from_str(&ok(&["ingest", "--manifest", manifest.trim(), "--out", p(&d.join("segments.json"))])).unwrap();
    assert_eq!(ingest["sessions"], 8);
    assert_eq!(ingest["segments"]["mic"], 24);
    ok(&["featurize", "--in", p(&d.join("segments.json")), "--out", p(&d.join("feat")), "--features", "mic_mel,tko"]);
    let model = d.join("model.vw");
    let train: serde_json::Value = serde_json::from_str(&ok(&[
        "train", "--features", p(&d.join("feat")), "--split", "within", "--modality", "mic", "--tko", "on", "--out", p(&model),
        "--epochs", "2", "--divisor", "16", "--folds", "3", "--max-folds", "1", "--batch-size", "8",
    ]))
    .unwrap();
    assert_eq!(train["folds"], 1);
    assert!(model.exists() && model.with_extension("cv.json").exists());
    let eval: serde_json::Value = serde_json::from_str(&ok(&["eval", "--model", p(&model), "--features", p(&d.join("feat"))])).unwrap();
    assert_eq!(eval["labels"].as_array().unwrap().len(), 4);
    assert!(eval["metrics"]["n"].as_u64().unwrap() > 0);
    let merged: serde_json::Value =
        serde_json::from_str(&ok(&["analyze", "merge", "--features", p(&d.join("feat")), "--model", p(&model), "--out", p(&d.join("an"))])).unwrap();
    assert!(merged["merged_accuracy"].as_f64().unwrap() >= merged["baseline_accuracy"].as_f64().unwrap());
    assert!(d.join("an/merge.txt").exists());

    let bad = vibmap(&["featurize", "--in", p(&d.join("segments.json")), "--out", p(&d.join("f2")), "--features", "mfcc"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown feature kind"));
    assert!(!vibmap(&["analyze", "noise", "--features", p(&d.join("feat")), "--out", p(&d.join("an"))]).status.success());
}

#[test]
fn serve_simulate_render() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let track = d.join("track.csv");
    let mut csv = String::from("timestamp_ms,lat,lon,label,confidence\n");
    for i in 0..60 {
        csv += &format!("{},{},{},{},0.9\n", 1000 * i, 22.3 + 1e-5 * i as f64, 114.2, if i < 30 { "grass" } else { "asphalt" });
    }
    std::fs::write(&track, csv).unwrap();
    let store = d.join("store");
    let mut server = Command::new(env!("CARGO_BIN_EXE_vibmap"))
        .args(["serve", "--port", "0", "--store", p(&store)])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect("listen line").to_string();
    let runs: serde_json::Value = serde_json::from_str(&ok(&["simulate-clients", "--n", "2", "--track", p(&track), "--url", &url])).unwrap();
    server.kill().unwrap();
    server.wait().unwrap();
    assert_eq!(runs.as_array().unwrap().len(), 2);
    assert!(runs.as_array().unwrap().iter().all(|r| r["sent"] == 60));

    let html = d.join("map.html");
    let geo = d.join("map.geojson");
    ok(&["render", "--store", p(&store), "--out", p(&html), "--geojson", p(&geo)]);
    assert!(std::fs::read_to_string(&html).unwrap().contains("grass"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&geo).unwrap()).unwrap();
    assert_map_kinds(&doc);
}

fn assert_map_kinds(doc: &serde_json::Value) {
    assert_eq!(doc["type"], "FeatureCollection");
    let kinds: Vec<&str> = doc["features"].as_array().unwrap().iter().map(|f| f["properties"]["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"segment") && kinds.contains(&"coverage"), "{kinds:?}");
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["fixtures", "--out", p(&d.join("data")), "--subjects", "1", "--materials", "sand,wood", "--seconds", "2"]);
    std::fs::write(d.join("good.json"), r#"{"stages": ["ingest", "featurize"], "manifest": "data/manifest.json", "work_dir": "work"}"#).unwrap();
    let out = ok(&["run", "--config", p(&d.join("good.json"))]);
    assert!(out.contains("featurize") && out.contains("ran"));
    assert!(ok(&["run", "--config", p(&d.join("good.json"))]).lines().all(|l| l.contains("cached")));

    std::fs::write(d.join("bad.json"), r#"{"stages": ["ingest"], "manifest": "missing.json", "work_dir": "work2"}"#).unwrap();
    let out = vibmap(&["run", "--config", p(&d.join("bad.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage ingest failed"));
    assert!(!vibmap(&["run", "--config", p(&d.join("nope.json"))]).status.success());
}
