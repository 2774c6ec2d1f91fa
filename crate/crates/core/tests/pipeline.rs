use std::path::Path;

use vibwalk_core::dsp::{FeatureKind, Layout};
use vibwalk_core::ingest::{build_index, load_manifest, write_manifest, write_samples, DatasetManifest, FileRef, Session, SessionFiles, SensorKind};
use vibwalk_core::pipeline::{featurize, material_label, FeatureSet};
use vibwalk_core::{Condition, Material};

fn tone(n: usize, rate: f64, f: f64) -> Vec<f32> {
    (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / rate).sin() as f32).collect()
}

fn dataset(dir: &Path) -> std::path::PathBuf {
    let mut sessions = Vec::new();
    for (k, material) in [Material::Tile, Material::Grass].into_iter().enumerate() {
        let mut files = SessionFiles::default();
        for sensor in SensorKind::ALL {
            let rate = sensor.nominal_rate();
            let name = format!("s{k}_{}.f32", sensor.name());
            write_samples(&dir.join(&name), &tone((4.0 * rate) as usize, rate, 60.0 + 40.0 * k as f64)).unwrap();
            files.set(sensor, FileRef::Path(name.into()));
        }
        sessions.push(Session { subject_id: 1, material, condition: Condition::Dry, plate: false, duration_s: 4.0, files });
    }
    let m = DatasetManifest { root: dir.to_path_buf(), subjects: vec![1], sessions };
    let path = dir.join("manifest.json");
    write_manifest(&m, &path).unwrap();
    path
}

#[test]
fn manifest_to_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let mpath = dataset(dir.path());
    let manifest = load_manifest(&mpath).unwrap();
    let index = build_index(&manifest, &mpath);
    assert!(index.skipped.is_empty());
    assert_eq!(index.count(SensorKind::Mic), 8);
    assert_eq!(index.count(SensorKind::AccForefoot), 4);

    let kinds = [FeatureKind::MicMel, FeatureKind::AccStft, FeatureKind::AccMel, FeatureKind::Tko, FeatureKind::Fused];
    let out = dir.path().join("features");
    let fi = featurize(&index, &kinds, &out).unwrap();
    assert_eq!(fi.entries.len(), 8);
    assert_eq!(fi.entries[1].acc_sensor, SensorKind::AccRearfoot);
    assert_eq!(fi.entries[3].acc_window, 1);

    let fs = FeatureSet::load(&out, &kinds).unwrap();
    for k in kinds {
        let (r, c) = k.layout().dims();
        assert_eq!(fs.tensors[&k].len(), 8 * r * c);
    }
    assert_eq!(Layout::Fused64x102.dims(), (64, 102));
    let (ds, chosen) = fs.dataset(FeatureKind::Fused, true, material_label).unwrap();
    assert_eq!(ds.len(), 8);
    assert_eq!(chosen.len(), 8);
    assert_eq!(ds.aux_len, 3200);
    assert_eq!(ds.labels[0], Material::Tile.index());
    assert_eq!(ds.labels[7], Material::Grass.index());
}
