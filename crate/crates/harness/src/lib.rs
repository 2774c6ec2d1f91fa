//! Declarative experiment runs over the vibwalk pipeline, plus synthetic
//! fixture datasets.

pub mod config;
pub mod fixtures;
pub mod run;
pub mod stages;

pub use config::{Analysis, ExperimentConfig, MapSpec, NetworkSpec, Stage};
pub use fixtures::{acc_resonance_hz, make_fixtures, mic_resonance_hz, FixtureSpec, DESK_MATERIALS, GAIT_HZ};
pub use run::{run, sha256_file, ExperimentReport, StageRecord, StageReport, WorkDir};
pub use stages::{evaluate_checkpoint, EvalReport, TrainOutput};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad fixture spec: {0}")]
    BadSpec(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("stage {stage} failed: {source}")]
    StageFailure {
        stage: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
