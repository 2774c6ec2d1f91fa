//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vibwalk_core::dsp::{BandwidthVariant, FeatureKind};
use vibwalk_core::ingest::SplitMode;
use vibwalk_core::model::{NetworkConfig, TrainConfig};
use vibwalk_core::pipeline::Modality;
use vibwalk_core::Condition;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Featurize,
    Train,
    Eval,
    Analyze,
    Map,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Ingest, Stage::Featurize, Stage::Train, Stage::Eval, Stage::Analyze, Stage::Map];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Analyze => "analyze",
            Stage::Map => "map",
        }
    }

    /// Stages whose outputs this stage reads.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Featurize => &[Stage::Ingest],
            Stage::Train => &[Stage::Featurize],
            Stage::Eval => &[Stage::Featurize, Stage::Train],
            Stage::Analyze => &[Stage::Ingest, Stage::Featurize, Stage::Train],
            Stage::Map => &[Stage::Featurize, Stage::Eval],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Grain,
    Wetdry,
    Noise,
    Merge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Channel widths are the reference widths divided by this.
    #[serde(default = "default_divisor")]
    pub divisor: usize,
    /// Explicit widths; overrides `divisor`.
    #[serde(default)]
    pub block_channels: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

fn default_divisor() -> usize {
    1
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec { divisor: 1, block_channels: None, seed: 0 }
    }
}

impl NetworkSpec {
    pub fn build(&self, kind: FeatureKind, n_classes: usize, tko: bool) -> NetworkConfig {
        let (rows, cols) = kind.layout().dims();
        let mut cfg = NetworkConfig::vibwalk(rows, cols, n_classes, tko).narrowed(self.divisor);
        if let Some(c) = &self.block_channels {
            cfg.block_channels = c.clone();
        }
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(default = "default_clients")]
    pub n_clients: usize,
    #[serde(default = "default_k")]
    pub smoothing_k: usize,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    /// Start of the synthetic walk, degrees.
    #[serde(default = "default_origin")]
    pub origin: (f64, f64),
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    /// Northward spacing between clients, degrees.
    #[serde(default = "default_offset")]
    pub client_offset_deg: f64,
}

fn default_clients() -> usize {
    2
}
fn default_k() -> usize {
    3
}
fn default_radius() -> f64 {
    5.0
}
fn default_origin() -> (f64, f64) {
    (22.3364, 114.2655)
}
fn default_speed() -> f64 {
    1.4
}
fn default_offset() -> f64 {
    0.0001
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec {
            n_clients: default_clients(),
            smoothing_k: default_k(),
            radius_m: default_radius(),
            origin: default_origin(),
            speed_mps: default_speed(),
            client_offset_deg: default_offset(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub stages: Vec<Stage>,
    pub manifest: PathBuf,
    pub work_dir: PathBuf,
    #[serde(default = "default_modality")]
    pub modality: Modality,
    #[serde(default)]
    pub tko: bool,
    /// Extra feature kinds to compute beyond those the model needs.
    #[serde(default)]
    pub extra_features: Vec<FeatureKind>,
    /// Conditions whose samples enter training; Noisy is held back by default.
    #[serde(default = "default_conditions")]
    pub train_conditions: Vec<Condition>,
    #[serde(default = "default_split")]
    pub split: SplitMode,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Run only the first N folds.
    #[serde(default)]
    pub max_folds: Option<usize>,
    /// Subjects held out per cross-user fold.
    #[serde(default = "default_group")]
    pub group_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub grain_variants: Vec<BandwidthVariant>,
    #[serde(default = "default_merge")]
    pub merge: Vec<String>,
    #[serde(default)]
    pub merge_retrain: bool,
    #[serde(default)]
    pub map: MapSpec,
}

fn default_modality() -> Modality {
    Modality::Mic
}
fn default_conditions() -> Vec<Condition> {
    vec![Condition::Dry, Condition::Wet, Condition::Clean]
}
fn default_split() -> SplitMode {
    SplitMode::WithinUser
}
fn default_folds() -> usize {
    10
}
fn default_group() -> usize {
    1
}
fn default_merge() -> Vec<String> {
    vibwalk_core::analysis::PAVING_MERGE.iter().map(|s| s.to_string()).collect()
}

impl ExperimentConfig {
    /// A config with defaults for everything but the paths and stages.
    pub fn new(stages: &[Stage], manifest: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            name: String::new(),
            stages: stages.to_vec(),
            manifest: manifest.into(),
            work_dir: work_dir.into(),
            modality: default_modality(),
            tko: false,
            extra_features: vec![],
            train_conditions: default_conditions(),
            split: default_split(),
            folds: default_folds(),
            max_folds: None,
            group_size: default_group(),
            seed: 0,
            network: NetworkSpec::default(),
            train: TrainConfig::default(),
            analyses: vec![],
            grain_variants: vec![],
            merge: default_merge(),
            merge_retrain: false,
            map: MapSpec::default(),
        }
    }

    /// Reads a config; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.manifest, &mut cfg.work_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        if self.stages.is_empty() {
            return bad("no stages".into());
        }
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("stages must be distinct and in pipeline order, got {:?}", self.stages.iter().map(|s| s.name()).collect::<Vec<_>>()));
        }
        if self.folds < 2 {
            return bad("folds must be at least 2".into());
        }
        if self.group_size == 0 {
            return bad("group_size must be positive".into());
        }
        if self.network.divisor == 0 {
            return bad("network.divisor must be positive".into());
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return bad("train.epochs and train.batch_size must be positive".into());
        }
        if self.train_conditions.is_empty() {
            return bad("train_conditions is empty".into());
        }
        if self.map.n_clients == 0 || self.map.smoothing_k == 0 || !(self.map.radius_m > 0.0) {
            return bad("map needs n_clients, smoothing_k and radius_m positive".into());
        }
        Ok(())
    }

    /// Feature kinds the featurize stage computes.
    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        let mut k = vec![self.modality.feature_kind()];
        if self.tko {
            k.push(FeatureKind::Tko);
        }
        k.extend(self.extra_features.iter().copied());
        k.sort();
        k.dedup();
        k
    }

    pub fn grain_variants(&self) -> Vec<BandwidthVariant> {
        if self.grain_variants.is_empty() {
            vec![BandwidthVariant::Literal, BandwidthVariant::Conventional]
        } else {
            self.grain_variants.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn stage_lists_valid_iff_strictly_ordered(picks in proptest::collection::vec(0usize..6, 1..8)) {
            let stages: Vec<Stage> = picks.iter().map(|&i| Stage::ALL[i]).collect();
            let ordered = stages.windows(2).all(|w| w[0] < w[1]);
            let cfg = ExperimentConfig::new(&stages, "m", "w");
            prop_assert_eq!(cfg.validate().is_ok(), ordered);
        }
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"stages":["ingest","featurize"],"manifest":"m.json","work_dir":"w"}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.modality, Modality::Mic);
        assert_eq!(cfg.folds, 10);
        assert_eq!(cfg.feature_kinds(), vec![FeatureKind::MicMel]);
    }

    #[test]
    fn out_of_order_stages_rejected() {
        let cfg = ExperimentConfig::new(&[Stage::Train, Stage::Ingest], "m", "w");
        assert!(matches!(cfg.validate(), Err(HarnessError::ConfigInvalid(_))));
        let cfg = ExperimentConfig::new(&[Stage::Ingest, Stage::Ingest], "m", "w");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let r: Result<ExperimentConfig, _> = serde_json::from_str(r#"{"stages":["ingest"],"manifest":"m","work_dir":"w","epochs":3}"#);
        assert!(r.is_err());
    }

    #[test]
    fn tko_adds_gait_kind() {
        let mut cfg = ExperimentConfig::new(&[Stage::Ingest], "m", "w");
        cfg.modality = Modality::Fused;
        cfg.tko = true;
        assert_eq!(cfg.feature_kinds(), vec![FeatureKind::Tko, FeatureKind::Fused]);
    }
}
