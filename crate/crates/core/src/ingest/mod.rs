//! Loading, validating and segmenting walking recordings, and building
//! reproducible evaluation splits.

mod adapter;
mod manifest;
mod recording;
mod resample;
mod segment;
mod split;

pub use adapter::{adapt_dataset, AdapterReport, SourceLayout};
pub use manifest::{load_manifest, write_manifest, DatasetManifest, FileRef, Session, SessionFiles};
pub use recording::{decode_recording, write_samples, Recording};
pub use resample::resample_polyphase;
pub use segment::{
    balance_report, build_index, segment, segment_count, BalanceReport, Segment, SegmentEntry, SegmentIndex,
};
pub use split::{cross_user_folds, cross_user_groups, within_user_folds, Fold, SplitMode, SplitPlan};

use serde::{Deserialize, Serialize};

use crate::taxonomy::{Condition, Material};

pub const ACC_RATE: f64 = 1600.0;
pub const MIC_RATE: f64 = 48000.0;
pub const ACC_WINDOW_S: f64 = 2.0;
pub const MIC_WINDOW_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    AccForefoot,
    AccRearfoot,
    Mic,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [SensorKind::AccForefoot, SensorKind::AccRearfoot, SensorKind::Mic];

    pub fn nominal_rate(self) -> f64 {
        match self {
            SensorKind::AccForefoot | SensorKind::AccRearfoot => ACC_RATE,
            SensorKind::Mic => MIC_RATE,
        }
    }

    /// Sensing band in Hz.
    pub fn band(self) -> (f64, f64) {
        match self {
            SensorKind::AccForefoot | SensorKind::AccRearfoot => (0.0, 800.0),
            SensorKind::Mic => (35.0, 18000.0),
        }
    }

    pub fn is_acc(self) -> bool {
        !matches!(self, SensorKind::Mic)
    }

    /// Baseline segmentation window in seconds.
    pub fn window_s(self) -> f64 {
        if self.is_acc() {
            ACC_WINDOW_S
        } else {
            MIC_WINDOW_S
        }
    }

    /// Allowed deviation, in samples, between the declared duration and the
    /// payload length: one Mel hop of the sensor's feature path.
    pub fn length_tolerance(self) -> usize {
        if self.is_acc() {
            80
        } else {
            800
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::AccForefoot => "acc_fore",
            SensorKind::AccRearfoot => "acc_rear",
            SensorKind::Mic => "mic",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("manifest missing or empty: {0}")]
    MissingManifest(String),
    #[error("unknown material `{0}`")]
    UnknownMaterial(String),
    #[error("duplicate session: subject {subject}, material {material}, condition {condition}")]
    DuplicateSession {
        subject: u32,
        material: Material,
        condition: Condition,
    },
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("{sensor:?}: declared rate {declared} Hz does not match nominal {nominal} Hz")]
    RateMismatch {
        sensor: SensorKind,
        declared: f64,
        nominal: f64,
    },
    #[error("corrupt payload in {path}: {reason}")]
    CorruptPayload { path: String, reason: String },
    #[error("session has no {0:?} file")]
    MissingFile(SensorKind),
    #[error("recording of {len} samples is shorter than one window of {window}")]
    TooShort { len: usize, window: usize },
    #[error("invalid window/stride: {0}")]
    InvalidWindow(String),
    #[error("need at least {needed} segments for {k} folds, got {got}")]
    TooFewSegments { needed: usize, k: usize, got: usize },
    #[error("need at least 2 subjects (and one group per fold), got {0}")]
    TooFewSubjects(usize),
    #[error("manifest parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
