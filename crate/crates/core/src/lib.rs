//! Decoding ground material, ground condition and gait information from
//! wideband on-foot vibration recordings.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common choices.

pub mod analysis;
pub mod dsp;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod taxonomy;

pub use scalar::Scalar;
pub use taxonomy::{Category, Condition, Material};

pub type Network32 = model::Network<f32>;
pub type Network64 = model::Network<f64>;
pub type Dataset32 = model::Dataset<f32>;
pub type FeatureTensor32 = dsp::FeatureTensor<f32>;
pub type FeatureTensor64 = dsp::FeatureTensor<f64>;
