//! Secondary studies: grain-size regression, wet/dry detection, noise
//! robustness and category merging.

mod grain;
mod merge;
mod noise;
mod wetdry;

pub use grain::{
    grain_from_index, grain_observations, grain_regression, linear_fit, pearson, Abscissa, FeatureFits, GrainMeans, GrainObservation,
    GrainReport, LinearFit, MIN_GRAIN_SEGMENTS,
};
pub use merge::{merge_and_eval, merge_map, retrain_merged, CvSummary, MergeReport, PAVING_MERGE};
pub use noise::{noise_eval, NoiseReport};
pub use wetdry::{wet_dry_class, wet_dry_eval, wet_dry_labels, WetDryReport};

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::dsp::DspError;
use crate::ingest::IngestError;
use crate::model::ModelError;
use crate::pipeline::PipelineError;
use crate::taxonomy::{Condition, Material};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{material}: {got} segments, need at least {needed}")]
    InsufficientData { material: Material, got: usize, needed: usize },
    #[error("no {condition} samples for {material}")]
    MissingCondition { material: Material, condition: Condition },
    #[error("model does not match the data: {0}")]
    ModelModalityMismatch(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Human-readable rendering of a report.
pub trait Summary {
    fn summary(&self) -> String;
}

/// Writes `<stem>.json` and `<stem>.txt` into `dir`.
pub fn write_report<R: Serialize + Summary>(dir: &Path, stem: &str, report: &R) -> Result<(), AnalysisError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(report)?)?;
    std::fs::write(dir.join(format!("{stem}.txt")), report.summary())?;
    Ok(())
}
